use super::context::InferenceContext;
use super::oracle::{
    MissingRef, Oracle, OracleRequest, OracleResponse, OracleTask, SlotAnnotation,
};
use super::InferenceError;
use crate::frontend::{params_with_meta, SlotRole};
use crate::types::normalize_type;
use rustpython_parser::ast;
use std::collections::BTreeMap;

/// Deterministic built-in oracle.
///
/// FindMissing proposes `Class.attr` references for attribute chains
/// rooted at names whose summarized annotation names a user-defined
/// class (including through `ContextVar[T].get()`). InferTypes derives
/// types from literal defaults, literal returns, basic arithmetic, and
/// annotated-dependency propagation, answering `Any` when no rule
/// applies. Identical requests produce identical responses.
#[derive(Debug, Clone, Default)]
pub struct RuleOracle;

impl Oracle for RuleOracle {
    fn respond(&self, request: &OracleRequest) -> Result<OracleResponse, InferenceError> {
        match request.task {
            OracleTask::FindMissing => Ok(OracleResponse::Missing(find_missing(&request.context))),
            OracleTask::InferTypes => {
                Ok(OracleResponse::Annotations(infer_types(&request.context)))
            }
        }
    }

    fn name(&self) -> &str {
        "rule"
    }
}

/// Per-member view assembled from the context.
struct SummaryView {
    /// Variable basename → annotation text.
    vars: BTreeMap<String, String>,
    /// Function basename → return annotation text.
    returns: BTreeMap<String, String>,
    /// Full slot-id text → annotation, for attribute lookups.
    slots: BTreeMap<String, String>,
}

fn summarize(ctx: &InferenceContext) -> SummaryView {
    let mut view = SummaryView {
        vars: BTreeMap::new(),
        returns: BTreeMap::new(),
        slots: BTreeMap::new(),
    };
    for s in &ctx.dependency_summaries {
        view.slots.insert(s.slot.text(), s.annotation.clone());
        match &s.slot.role {
            SlotRole::Var => {
                view.vars
                    .insert(s.entity.basename().to_string(), s.annotation.clone());
            }
            SlotRole::Return => {
                view.returns
                    .insert(s.entity.basename().to_string(), s.annotation.clone());
            }
            SlotRole::Param(_) => {}
        }
    }
    view
}

/// Environment of name → type text built by forward propagation.
fn build_env(
    body: &[ast::Stmt],
    params: &BTreeMap<String, String>,
    view: &SummaryView,
) -> BTreeMap<String, String> {
    let mut env: BTreeMap<String, String> = view.vars.clone();
    env.extend(params.clone());
    for stmt in body {
        let ast::Stmt::Assign(a) = stmt else { continue };
        let [ast::Expr::Name(target)] = a.targets.as_slice() else {
            continue;
        };
        if let Some(t) = value_type(&a.value, &env, view) {
            env.insert(target.id.to_string(), t);
        }
    }
    env
}

/// Type of an expression under the propagation rules, if derivable.
fn value_type(
    e: &ast::Expr,
    env: &BTreeMap<String, String>,
    view: &SummaryView,
) -> Option<String> {
    match e {
        ast::Expr::Constant(c) => literal_type(&c.value),
        ast::Expr::Name(n) => env.get(n.id.as_str()).cloned(),
        ast::Expr::BinOp(b) => {
            let left = value_type(&b.left, env, view)?;
            let right = value_type(&b.right, env, view)?;
            arithmetic_result(&left, &right, &b.op)
        }
        ast::Expr::List(l) => Some(container_type("list", &l.elts, env, view)),
        ast::Expr::Set(s) => Some(container_type("set", &s.elts, env, view)),
        ast::Expr::Dict(d) => {
            if d.values.is_empty() {
                return Some("dict".to_string());
            }
            let keys: Option<Vec<String>> = d
                .keys
                .iter()
                .map(|k| k.as_ref().and_then(|k| value_type(k, env, view)))
                .collect();
            let vals: Option<Vec<String>> = d
                .values
                .iter()
                .map(|v| value_type(v, env, view))
                .collect();
            match (uniform(keys), uniform(vals)) {
                (Some(k), Some(v)) => Some(format!("dict[{k}, {v}]")),
                _ => Some("dict".to_string()),
            }
        }
        ast::Expr::Tuple(_) => Some("tuple".to_string()),
        ast::Expr::Call(c) => match c.func.as_ref() {
            ast::Expr::Name(n) => {
                let name = n.id.as_str();
                if name == "len" {
                    return Some("int".to_string());
                }
                // A summarized dependency function's return type.
                if let Some(ret) = view.returns.get(name) {
                    return Some(ret.clone());
                }
                // Class-looking constructor.
                if name.chars().next().is_some_and(|c| c.is_uppercase()) {
                    return Some(name.to_string());
                }
                None
            }
            ast::Expr::Attribute(at) => {
                // `x = name.get(...)` where name: ContextVar[T] yields T.
                if at.attr.as_str() == "get" {
                    if let ast::Expr::Name(base) = at.value.as_ref() {
                        if let Some(base_ty) = env.get(base.id.as_str()) {
                            if let Some(inner) = contextvar_inner(base_ty) {
                                return Some(inner);
                            }
                        }
                    }
                }
                None
            }
            _ => None,
        },
        _ => None,
    }
}

/// Result of arithmetic between two derived basic types.
fn arithmetic_result(left: &str, right: &str, op: &ast::Operator) -> Option<String> {
    let num = |t: &str| matches!(t, "int" | "bool");
    let floaty = |t: &str| t == "float";
    let result = match op {
        ast::Operator::Add => match (left, right) {
            ("str", "str") => "str",
            ("bytes", "bytes") => "bytes",
            _ if num(left) && num(right) => "int",
            _ if (num(left) || floaty(left)) && (num(right) || floaty(right)) => "float",
            _ => return None,
        },
        ast::Operator::Sub | ast::Operator::Mod | ast::Operator::FloorDiv | ast::Operator::Pow => {
            match (left, right) {
                _ if num(left) && num(right) => "int",
                _ if (num(left) || floaty(left)) && (num(right) || floaty(right)) => "float",
                _ => return None,
            }
        }
        ast::Operator::Mult => match (left, right) {
            ("str", _) if num(right) => "str",
            (_, "str") if num(left) => "str",
            _ if num(left) && num(right) => "int",
            _ if (num(left) || floaty(left)) && (num(right) || floaty(right)) => "float",
            _ => return None,
        },
        ast::Operator::Div => match (left, right) {
            _ if (num(left) || floaty(left)) && (num(right) || floaty(right)) => "float",
            _ => return None,
        },
        _ => return None,
    };
    Some(result.to_string())
}

fn literal_type(c: &ast::Constant) -> Option<String> {
    let head = match c {
        ast::Constant::Int(_) => "int",
        ast::Constant::Float(_) => "float",
        ast::Constant::Complex { .. } => "complex",
        ast::Constant::Str(_) => "str",
        ast::Constant::Bytes(_) => "bytes",
        ast::Constant::Bool(_) => "bool",
        ast::Constant::None => return None,
        _ => return None,
    };
    Some(head.to_string())
}

fn container_type(
    head: &str,
    elts: &[ast::Expr],
    env: &BTreeMap<String, String>,
    view: &SummaryView,
) -> String {
    if elts.is_empty() {
        return head.to_string();
    }
    let tys: Option<Vec<String>> = elts.iter().map(|e| value_type(e, env, view)).collect();
    match uniform(tys) {
        Some(t) => format!("{head}[{t}]"),
        None => head.to_string(),
    }
}

fn uniform(tys: Option<Vec<String>>) -> Option<String> {
    let tys = tys?;
    let first = tys.first()?.clone();
    tys.iter().all(|t| *t == first).then_some(first)
}

/// `ContextVar[T]` → `T`.
fn contextvar_inner(ty: &str) -> Option<String> {
    let n = normalize_type(ty).ok()?;
    if n.head() != "ContextVar" {
        return None;
    }
    match &n.node {
        crate::types::TypeNode::Named { args, .. } if args.len() == 1 => {
            normalize_type(&render(&args[0])).ok().map(|t| t.text)
        }
        _ => None,
    }
}

fn render(node: &crate::types::TypeNode) -> String {
    use crate::types::TypeNode;
    match node {
        TypeNode::Named { head, args } => {
            if args.is_empty() {
                head.clone()
            } else {
                let inner: Vec<String> = args.iter().map(render).collect();
                format!("{}[{}]", head, inner.join(", "))
            }
        }
        TypeNode::Group(items) => {
            let inner: Vec<String> = items.iter().map(render).collect();
            format!("[{}]", inner.join(", "))
        }
        TypeNode::Ellipsis => "...".to_string(),
        TypeNode::LiteralArg(s) => s.clone(),
    }
}

fn parse_member(code: &str) -> Option<ast::ModModule> {
    match rustpython_parser::parse(code, rustpython_parser::Mode::Module, "<member>") {
        Ok(ast::Mod::Module(m)) => Some(m),
        _ => None,
    }
}

/// Statements of a member definition, with parameters when it is a
/// function.
enum MemberShape {
    Function {
        params: Vec<(String, Option<String>, Option<String>)>, // (name, annotation, default literal type)
        has_return_ann: bool,
        body: Vec<ast::Stmt>,
    },
    Variable {
        value: ast::Expr,
        annotated: bool,
    },
    Other,
}

fn member_shape(code: &str) -> MemberShape {
    let Some(module) = parse_member(code) else {
        return MemberShape::Other;
    };
    let Some(stmt) = module.body.into_iter().next() else {
        return MemberShape::Other;
    };
    match stmt {
        ast::Stmt::FunctionDef(f) => MemberShape::Function {
            params: shape_params(&f.args, code),
            has_return_ann: f.returns.is_some(),
            body: f.body,
        },
        ast::Stmt::AsyncFunctionDef(f) => MemberShape::Function {
            params: shape_params(&f.args, code),
            has_return_ann: f.returns.is_some(),
            body: f.body,
        },
        ast::Stmt::Assign(a) => MemberShape::Variable {
            value: *a.value,
            annotated: false,
        },
        ast::Stmt::AnnAssign(a) => match a.value {
            Some(v) => MemberShape::Variable {
                value: *v,
                annotated: true,
            },
            None => MemberShape::Other,
        },
        _ => MemberShape::Other,
    }
}

fn shape_params(
    args: &ast::Arguments,
    src: &str,
) -> Vec<(String, Option<String>, Option<String>)> {
    use rustpython_parser::ast::Ranged;
    let metas = params_with_meta(args);
    let mut out = Vec::new();
    let defaults: BTreeMap<String, Option<String>> = collect_defaults(args);
    for (i, (arg, _, _, variadic)) in metas.iter().enumerate() {
        if *variadic {
            continue;
        }
        let name = arg.arg.to_string();
        if i == 0 && (name == "self" || name == "cls") {
            continue;
        }
        let ann = arg.annotation.as_ref().map(|a| {
            src[a.range().start().to_usize()..a.range().end().to_usize()]
                .trim()
                .to_string()
        });
        let default_ty = defaults.get(&name).cloned().flatten();
        out.push((name, ann, default_ty));
    }
    out
}

fn collect_defaults(args: &ast::Arguments) -> BTreeMap<String, Option<String>> {
    let mut out = BTreeMap::new();
    for group in [&args.posonlyargs, &args.args, &args.kwonlyargs] {
        for a in group.iter() {
            let ty = a.default.as_deref().map(default_literal_type);
            out.insert(a.def.arg.to_string(), ty.flatten());
        }
    }
    out
}

fn default_literal_type(e: &ast::Expr) -> Option<String> {
    match e {
        ast::Expr::Constant(c) => literal_type(&c.value),
        ast::Expr::List(l) if l.elts.is_empty() => Some("list".to_string()),
        ast::Expr::Dict(d) if d.values.is_empty() => Some("dict".to_string()),
        ast::Expr::Tuple(t) if t.elts.is_empty() => Some("tuple".to_string()),
        _ => None,
    }
}

fn find_missing(ctx: &InferenceContext) -> Vec<MissingRef> {
    let view = summarize(ctx);
    let mut proposals: Vec<MissingRef> = Vec::new();

    for (member_id, code) in &ctx.member_definitions {
        let MemberShape::Function { params, body, .. } = member_shape(code) else {
            continue;
        };
        let param_env: BTreeMap<String, String> = params
            .iter()
            .filter_map(|(n, ann, _)| ann.clone().map(|a| (n.clone(), a)))
            .collect();
        let env = build_env(&body, &param_env, &view);

        let mut accesses = Vec::new();
        collect_attribute_accesses(&body, &mut accesses);
        let stdlib = crate::metrics::AttrCatalog::builtin();
        for (root, attr) in accesses {
            let Some(root_ty) = env.get(&root) else {
                continue;
            };
            let Ok(norm) = normalize_type(root_ty) else {
                continue;
            };
            let head = norm.head().to_string();
            // Builtin- and stdlib-headed values have no repo attribute
            // entities; only user-class-looking heads can be missing.
            if head.is_empty()
                || head.chars().next().is_some_and(|c| c.is_lowercase())
                || stdlib.is_known_head(&head)
            {
                continue;
            }
            let suffix = format!("{head}.{attr}");
            let already_known = view
                .slots
                .keys()
                .any(|slot| slot.split('#').next().is_some_and(|e| e.ends_with(&suffix)));
            if already_known {
                continue;
            }
            proposals.push(MissingRef {
                from_entity: member_id.to_string(),
                target_ref: suffix,
                reason: format!("attribute access on `{root}` of type {root_ty}"),
            });
        }
    }
    proposals.sort_by(|a, b| (&a.from_entity, &a.target_ref).cmp(&(&b.from_entity, &b.target_ref)));
    proposals.dedup_by(|a, b| a.from_entity == b.from_entity && a.target_ref == b.target_ref);
    proposals
}

/// (`root`, `attr`) pairs for every attribute access rooted at a plain
/// name anywhere in the statements.
fn collect_attribute_accesses(body: &[ast::Stmt], out: &mut Vec<(String, String)>) {
    fn expr(e: &ast::Expr, out: &mut Vec<(String, String)>) {
        if let ast::Expr::Attribute(a) = e {
            if let ast::Expr::Name(n) = a.value.as_ref() {
                out.push((n.id.to_string(), a.attr.to_string()));
            }
        }
        visit_children(e, &mut |child| expr(child, out));
    }
    fn visit_children(e: &ast::Expr, f: &mut impl FnMut(&ast::Expr)) {
        match e {
            ast::Expr::Attribute(a) => f(&a.value),
            ast::Expr::Call(c) => {
                f(&c.func);
                c.args.iter().for_each(&mut *f);
                c.keywords.iter().for_each(|k| f(&k.value));
            }
            ast::Expr::BinOp(b) => {
                f(&b.left);
                f(&b.right);
            }
            ast::Expr::BoolOp(b) => b.values.iter().for_each(f),
            ast::Expr::UnaryOp(u) => f(&u.operand),
            ast::Expr::Compare(c) => {
                f(&c.left);
                c.comparators.iter().for_each(f);
            }
            ast::Expr::IfExp(i) => {
                f(&i.test);
                f(&i.body);
                f(&i.orelse);
            }
            ast::Expr::Tuple(t) => t.elts.iter().for_each(f),
            ast::Expr::List(l) => l.elts.iter().for_each(f),
            ast::Expr::Set(s) => s.elts.iter().for_each(f),
            ast::Expr::Dict(d) => {
                d.keys.iter().flatten().for_each(&mut *f);
                d.values.iter().for_each(f);
            }
            ast::Expr::Subscript(s) => {
                f(&s.value);
                f(&s.slice);
            }
            ast::Expr::Starred(s) => f(&s.value),
            ast::Expr::Await(a) => f(&a.value),
            ast::Expr::NamedExpr(n) => f(&n.value),
            _ => {}
        }
    }
    fn stmt(s: &ast::Stmt, out: &mut Vec<(String, String)>) {
        match s {
            ast::Stmt::Expr(e) => expr(&e.value, out),
            ast::Stmt::Assign(a) => {
                a.targets.iter().for_each(|t| expr(t, out));
                expr(&a.value, out);
            }
            ast::Stmt::AugAssign(a) => {
                expr(&a.target, out);
                expr(&a.value, out);
            }
            ast::Stmt::AnnAssign(a) => {
                if let Some(v) = &a.value {
                    expr(v, out);
                }
            }
            ast::Stmt::Return(r) => {
                if let Some(v) = &r.value {
                    expr(v, out);
                }
            }
            ast::Stmt::If(i) => {
                expr(&i.test, out);
                i.body.iter().for_each(|s| stmt(s, out));
                i.orelse.iter().for_each(|s| stmt(s, out));
            }
            ast::Stmt::While(w) => {
                expr(&w.test, out);
                w.body.iter().for_each(|s| stmt(s, out));
                w.orelse.iter().for_each(|s| stmt(s, out));
            }
            ast::Stmt::For(fo) => {
                expr(&fo.iter, out);
                fo.body.iter().for_each(|s| stmt(s, out));
                fo.orelse.iter().for_each(|s| stmt(s, out));
            }
            ast::Stmt::With(w) => {
                w.items.iter().for_each(|i| expr(&i.context_expr, out));
                w.body.iter().for_each(|s| stmt(s, out));
            }
            ast::Stmt::Try(t) => {
                t.body.iter().for_each(|s| stmt(s, out));
                for h in &t.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    h.body.iter().for_each(|s| stmt(s, out));
                }
                t.orelse.iter().for_each(|s| stmt(s, out));
                t.finalbody.iter().for_each(|s| stmt(s, out));
            }
            _ => {}
        }
    }
    body.iter().for_each(|s| stmt(s, out));
}

fn infer_types(ctx: &InferenceContext) -> Vec<SlotAnnotation> {
    let view = summarize(ctx);
    let mut out = Vec::new();

    // Feedback constraints override the syntactic rules.
    let feedback = FeedbackRules::parse(&ctx.feedback);

    for (member_id, code) in &ctx.member_definitions {
        match member_shape(code) {
            MemberShape::Function {
                params,
                has_return_ann,
                body,
            } => {
                let member_name = member_id.basename();
                let sig_constraint = feedback.signature_for(member_name);

                let param_env: BTreeMap<String, String> = params
                    .iter()
                    .filter_map(|(n, ann, _)| ann.clone().map(|a| (n.clone(), a)))
                    .collect();
                let env = build_env(&body, &param_env, &view);

                let mut inferred_params: BTreeMap<String, String> = BTreeMap::new();
                for (i, (name, ann, default_ty)) in params.iter().enumerate() {
                    if ann.is_some() {
                        continue; // already annotated in source
                    }
                    let slot = format!("{member_id}#param({name})");
                    let ty = sig_constraint
                        .as_ref()
                        .and_then(|sig| sig.params.get(name).cloned())
                        .or_else(|| feedback.arg_type_for(member_name, i))
                        .or_else(|| default_ty.clone())
                        .or_else(|| append_target_type(&body, name, &env, &view))
                        .unwrap_or_else(|| "Any".to_string());
                    inferred_params.insert(name.clone(), ty.clone());
                    out.push(SlotAnnotation {
                        slot,
                        type_expr: canonical(&ty),
                    });
                }

                if !has_return_ann {
                    let mut full_env = env.clone();
                    full_env.extend(inferred_params.clone());
                    let ty = sig_constraint
                        .as_ref()
                        .and_then(|sig| sig.ret.clone())
                        .or_else(|| feedback.return_type_for())
                        .or_else(|| return_type(&body, &full_env, &view))
                        .unwrap_or_else(|| "Any".to_string());
                    out.push(SlotAnnotation {
                        slot: format!("{member_id}#return"),
                        type_expr: canonical(&ty),
                    });
                }
            }
            MemberShape::Variable { value, annotated } => {
                if annotated {
                    continue;
                }
                let env = build_env(&[], &BTreeMap::new(), &view);
                let ty = value_type(&value, &env, &view).unwrap_or_else(|| "Any".to_string());
                out.push(SlotAnnotation {
                    slot: format!("{member_id}#var"),
                    type_expr: canonical(&ty),
                });
            }
            MemberShape::Other => {}
        }
    }
    out.sort_by(|a, b| a.slot.cmp(&b.slot));
    out
}

fn canonical(ty: &str) -> String {
    normalize_type(ty).map(|t| t.text).unwrap_or_else(|_| "Any".to_string())
}

/// `<target>.append(param)` gives the parameter the element type of the
/// list-typed target.
fn append_target_type(
    body: &[ast::Stmt],
    param: &str,
    env: &BTreeMap<String, String>,
    view: &SummaryView,
) -> Option<String> {
    let mut found = None;
    let mut calls = Vec::new();
    collect_append_calls(body, &mut calls);
    for (target_root, target_attr, arg_name) in calls {
        if arg_name != param {
            continue;
        }
        // The target is either a plain name or `root.attr` whose entity
        // carries a summarized annotation.
        let target_ty = match &target_attr {
            None => env.get(&target_root).cloned(),
            Some(attr) => {
                let root_ty = env.get(&target_root)?;
                let head = normalize_type(root_ty).ok()?.head().to_string();
                let suffix = format!("{head}.{attr}#var");
                view.slots
                    .iter()
                    .find(|(slot, _)| slot.ends_with(&suffix))
                    .map(|(_, ann)| ann.clone())
            }
        };
        let Some(target_ty) = target_ty else { continue };
        let norm = normalize_type(&target_ty).ok()?;
        if norm.head() == "list" {
            if let crate::types::TypeNode::Named { args, .. } = &norm.node {
                if let Some(elem) = args.first() {
                    found = Some(render(elem));
                }
            }
        }
    }
    found
}

/// (`root`, optional attr of the append target, argument name) for every
/// `X.append(name)` / `X.attr.append(name)` call.
fn collect_append_calls(body: &[ast::Stmt], out: &mut Vec<(String, Option<String>, String)>) {
    fn walk_expr(e: &ast::Expr, out: &mut Vec<(String, Option<String>, String)>) {
        if let ast::Expr::Call(c) = e {
            if let ast::Expr::Attribute(method) = c.func.as_ref() {
                if method.attr.as_str() == "append" && c.args.len() == 1 {
                    if let ast::Expr::Name(arg) = &c.args[0] {
                        match method.value.as_ref() {
                            ast::Expr::Name(root) => {
                                out.push((root.id.to_string(), None, arg.id.to_string()));
                            }
                            ast::Expr::Attribute(inner) => {
                                if let ast::Expr::Name(root) = inner.value.as_ref() {
                                    out.push((
                                        root.id.to_string(),
                                        Some(inner.attr.to_string()),
                                        arg.id.to_string(),
                                    ));
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
            walk_expr(&c.func, out);
            c.args.iter().for_each(|a| walk_expr(a, out));
        }
    }
    fn walk(body: &[ast::Stmt], out: &mut Vec<(String, Option<String>, String)>) {
        for stmt in body {
            match stmt {
                ast::Stmt::Expr(e) => walk_expr(&e.value, out),
                ast::Stmt::Assign(a) => walk_expr(&a.value, out),
                ast::Stmt::Return(r) => {
                    if let Some(v) = &r.value {
                        walk_expr(v, out);
                    }
                }
                ast::Stmt::If(i) => {
                    walk(&i.body, out);
                    walk(&i.orelse, out);
                }
                ast::Stmt::For(f) => walk(&f.body, out),
                ast::Stmt::While(w) => walk(&w.body, out),
                ast::Stmt::With(w) => walk(&w.body, out),
                ast::Stmt::Try(t) => {
                    walk(&t.body, out);
                    t.orelse.iter().for_each(|_| {});
                }
                _ => {}
            }
        }
    }
    walk(body, out);
}

/// Return type from the function's return statements: `None` when there
/// are none, the single derived type, or a union of the distinct derived
/// types. Unresolvable returns poison the result.
fn return_type(
    body: &[ast::Stmt],
    env: &BTreeMap<String, String>,
    view: &SummaryView,
) -> Option<String> {
    let mut returns = Vec::new();
    collect_returns(body, &mut returns);
    if returns.is_empty() {
        return Some("None".to_string());
    }
    let mut tys = Vec::new();
    for r in &returns {
        match r {
            Some(e) => tys.push(value_type(e, env, view)?),
            None => tys.push("None".to_string()),
        }
    }
    tys.sort();
    tys.dedup();
    match tys.len() {
        1 => Some(tys.pop().unwrap()),
        _ => Some(format!("Union[{}]", tys.join(", "))),
    }
}

fn collect_returns<'a>(body: &'a [ast::Stmt], out: &mut Vec<Option<&'a ast::Expr>>) {
    for stmt in body {
        match stmt {
            ast::Stmt::Return(r) => out.push(r.value.as_deref()),
            ast::Stmt::If(s) => {
                collect_returns(&s.body, out);
                collect_returns(&s.orelse, out);
            }
            ast::Stmt::While(s) => {
                collect_returns(&s.body, out);
                collect_returns(&s.orelse, out);
            }
            ast::Stmt::For(s) => {
                collect_returns(&s.body, out);
                collect_returns(&s.orelse, out);
            }
            ast::Stmt::With(s) => collect_returns(&s.body, out),
            ast::Stmt::Try(s) => {
                collect_returns(&s.body, out);
                for h in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    collect_returns(&h.body, out);
                }
                collect_returns(&s.orelse, out);
                collect_returns(&s.finalbody, out);
            }
            _ => {}
        }
    }
}

/// Constraints recovered from validation feedback lines.
struct FeedbackRules {
    /// `name(params) -> ret` signature constraints by function name.
    signatures: BTreeMap<String, SignatureConstraint>,
    /// `Argument N to "f" has incompatible type "T"` → (f, N-1, T).
    arg_types: Vec<(String, usize, String)>,
    /// `Incompatible return value type (got "T", ...)` → T.
    return_got: Option<String>,
}

struct SignatureConstraint {
    params: BTreeMap<String, String>,
    ret: Option<String>,
}

impl FeedbackRules {
    fn parse(feedback: &[String]) -> Self {
        let mut rules = FeedbackRules {
            signatures: BTreeMap::new(),
            arg_types: Vec::new(),
            return_got: None,
        };
        for line in feedback {
            // Signature constraint: `m(x: str, y: int) -> bool`
            if let Some(sig) = parse_signature_line(line) {
                rules.signatures.insert(sig.0, sig.1);
                continue;
            }
            if let Some(got) = extract_between(line, "Incompatible return value type (got \"", "\"") {
                rules.return_got = Some(got);
            }
            if let Some(rest) = line.strip_prefix_after("Argument ") {
                // `Argument N to "f" has incompatible type "T"; expected ...`
                let mut parts = rest.splitn(2, " to \"");
                if let (Some(num), Some(tail)) = (parts.next(), parts.next()) {
                    if let Ok(n) = num.trim().parse::<usize>() {
                        if let Some(fname_end) = tail.find('"') {
                            let fname = &tail[..fname_end];
                            if let Some(t) =
                                extract_between(tail, "has incompatible type \"", "\"")
                            {
                                rules.arg_types.push((fname.to_string(), n - 1, t));
                            }
                        }
                    }
                }
            }
        }
        rules
    }

    fn signature_for(&self, name: &str) -> Option<&SignatureConstraint> {
        self.signatures.get(name)
    }

    fn arg_type_for(&self, fname: &str, position: usize) -> Option<String> {
        self.arg_types
            .iter()
            .find(|(f, p, _)| f == fname && *p == position)
            .map(|(_, _, t)| t.clone())
    }

    fn return_type_for(&self) -> Option<String> {
        self.return_got.clone()
    }
}

trait StrExt {
    fn strip_prefix_after<'a>(&'a self, prefix: &str) -> Option<&'a str>;
}

impl StrExt for String {
    fn strip_prefix_after<'a>(&'a self, prefix: &str) -> Option<&'a str> {
        let at = self.find(prefix)?;
        Some(&self[at + prefix.len()..])
    }
}

fn extract_between(s: &str, open: &str, close: &str) -> Option<String> {
    let at = s.find(open)? + open.len();
    let rest = &s[at..];
    let end = rest.find(close)?;
    Some(rest[..end].to_string())
}

/// `m(x: str, y: int) -> bool` → constraint for `m`.
fn parse_signature_line(line: &str) -> Option<(String, SignatureConstraint)> {
    let line = line.trim();
    let open = line.find('(')?;
    let name = line[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return None;
    }
    let close = line.rfind(')')?;
    let arrow = line[close..].find("->").map(|i| close + i)?;
    let ret = line[arrow + 2..].trim();
    if ret.is_empty() {
        return None;
    }
    let mut params = BTreeMap::new();
    for part in split_top_level(&line[open + 1..close]) {
        let (p, t) = part.split_once(':')?;
        params.insert(p.trim().to_string(), t.trim().to_string());
    }
    Some((
        name.to_string(),
        SignatureConstraint {
            params,
            ret: Some(ret.to_string()),
        },
    ))
}

/// Split on commas outside brackets.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' | '(' => {
                depth += 1;
                cur.push(ch);
            }
            ']' | ')' => {
                depth -= 1;
                cur.push(ch);
            }
            ',' if depth == 0 => {
                if !cur.trim().is_empty() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
            }
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}
