use super::builtins::PY_BUILTINS;
use super::symbols::{parse_ann, ClassSym, FuncSym, ImportTarget, Project};
use super::Finding;
use crate::frontend::{params_with_meta, LineIndex, SourceRepo};
use crate::metrics::AttrCatalog;
use crate::types::{NormalizedType, TypeNode};
use rustpython_parser::ast::{self, Ranged};
use std::collections::{BTreeMap, BTreeSet};

/// Check a loaded repository and return sorted findings with
/// `# type: ignore` suppressions already applied.
pub fn check_repo(repo: &SourceRepo) -> Vec<Finding> {
    let (project, syntax_errors) = Project::build(repo);
    let catalog = AttrCatalog::builtin();
    let mut findings: Vec<Finding> = syntax_errors
        .into_iter()
        .map(|(file, line, message)| Finding {
            file,
            line,
            code: "syntax".to_string(),
            message,
        })
        .collect();

    for file in &repo.files {
        let Ok(ast::Mod::Module(module)) =
            rustpython_parser::parse(&file.text, rustpython_parser::Mode::Module, &file.path)
        else {
            continue;
        };
        let module_name = SourceRepo::module_path(&file.path);
        let mut checker = ModuleChecker {
            project: &project,
            catalog: &catalog,
            module: module_name,
            file: file.path.clone(),
            src: &file.text,
            lines: LineIndex::new(&file.text),
            findings: Vec::new(),
        };
        checker.check_module(&module.body);
        findings.extend(checker.findings);
    }

    // Honor `# type: ignore` line suppressions.
    let ignored: BTreeMap<&str, BTreeSet<u32>> = repo
        .files
        .iter()
        .map(|f| {
            let lines: BTreeSet<u32> = f
                .text
                .lines()
                .enumerate()
                .filter(|(_, l)| l.contains("# type: ignore"))
                .map(|(i, _)| i as u32 + 1)
                .collect();
            (f.path.as_str(), lines)
        })
        .collect();
    findings.retain(|f| {
        ignored
            .get(f.file.as_str())
            .map(|lines| !lines.contains(&f.line))
            .unwrap_or(true)
    });
    findings.sort();
    findings.dedup();
    findings
}

/// A value as the checker sees it. `Unknown` participates in no checks.
#[derive(Debug, Clone)]
enum Val {
    Known(NormalizedType),
    ClassObj(String, String),
    BuiltinCtor(String),
    Func(String, String),
    BoundMethod(String, String, String),
    /// Method on a builtin value, kept for the typed `list.append` case.
    BuiltinMethod { recv: NormalizedType, name: String },
    Module(String),
    Unknown,
}

impl Val {
    fn known(&self) -> Option<&NormalizedType> {
        match self {
            Val::Known(t) => Some(t),
            _ => None,
        }
    }
}

struct Env {
    locals: BTreeMap<String, Val>,
    /// Locals with explicit annotations; assignments re-check against these.
    ann_locals: BTreeMap<String, NormalizedType>,
    declared: BTreeSet<String>,
    globals_decl: BTreeSet<String>,
    self_class: Option<(String, String)>,
    in_function: bool,
}

impl Env {
    fn module_level() -> Self {
        Env {
            locals: BTreeMap::new(),
            ann_locals: BTreeMap::new(),
            declared: BTreeSet::new(),
            globals_decl: BTreeSet::new(),
            self_class: None,
            in_function: false,
        }
    }
}

struct ModuleChecker<'p> {
    project: &'p Project,
    catalog: &'p AttrCatalog,
    module: String,
    file: String,
    src: &'p str,
    lines: LineIndex,
    findings: Vec<Finding>,
}

impl<'p> ModuleChecker<'p> {
    fn emit(&mut self, line: u32, code: &str, message: String) {
        self.findings.push(Finding {
            file: self.file.clone(),
            line,
            code: code.to_string(),
            message,
        });
    }

    fn line_of(&self, range: ast::text_size::TextRange) -> u32 {
        self.lines.locate(range.start().to_usize()).0
    }

    fn check_module(&mut self, body: &[ast::Stmt]) {
        let mut env = Env::module_level();
        self.check_block(body, &mut env, None);
    }

    /// Walk statements at module/class level (`class_ctx` names the class
    /// whose body we are in) — function bodies go through
    /// `check_function`.
    fn check_block(&mut self, body: &[ast::Stmt], env: &mut Env, class_ctx: Option<&str>) {
        for stmt in body {
            match stmt {
                ast::Stmt::FunctionDef(f) => {
                    self.check_annotation_sites(&f.args, f.returns.as_deref(), env);
                    self.check_function(
                        f.name.as_str(),
                        &f.args,
                        &f.body,
                        f.returns.as_deref(),
                        class_ctx,
                    );
                }
                ast::Stmt::AsyncFunctionDef(f) => {
                    self.check_annotation_sites(&f.args, f.returns.as_deref(), env);
                    self.check_function(
                        f.name.as_str(),
                        &f.args,
                        &f.body,
                        f.returns.as_deref(),
                        class_ctx,
                    );
                }
                ast::Stmt::ClassDef(c) => {
                    let mut class_env = Env::module_level();
                    self.check_block(&c.body, &mut class_env, Some(c.name.as_str()));
                    self.check_overrides(c);
                }
                ast::Stmt::Assign(a) => {
                    let val = self.infer_expr(&a.value, env);
                    for t in &a.targets {
                        self.check_assign_target(t, &val, env, class_ctx, self.line_of(a.range));
                    }
                    self.check_var_annotated(a, class_ctx, env);
                }
                ast::Stmt::AnnAssign(a) => {
                    self.check_annotation_expr(&a.annotation, env);
                    if let Some(value) = &a.value {
                        let val = self.infer_expr(value, env);
                        let ann = parse_ann(self.src, &a.annotation);
                        if let (Some(got), Some(want)) = (val.known(), &ann) {
                            if !self.assignable(got, want) {
                                self.emit(
                                    self.line_of(a.range),
                                    "assignment",
                                    format!(
                                        "Incompatible types in assignment (expression has type \"{}\", variable has type \"{}\")",
                                        got.text, want.text
                                    ),
                                );
                            }
                        }
                        if let ast::Expr::Name(n) = a.target.as_ref() {
                            if let Some(t) = &ann {
                                env.ann_locals.insert(n.id.to_string(), t.clone());
                                env.locals.insert(n.id.to_string(), Val::Known(t.clone()));
                            }
                        }
                    }
                }
                ast::Stmt::AugAssign(a) => {
                    self.infer_expr(&a.value, env);
                }
                ast::Stmt::Expr(e) => {
                    self.infer_expr(&e.value, env);
                }
                ast::Stmt::If(s) => {
                    self.infer_expr(&s.test, env);
                    self.check_block(&s.body, env, class_ctx);
                    self.check_block(&s.orelse, env, class_ctx);
                }
                ast::Stmt::While(s) => {
                    self.infer_expr(&s.test, env);
                    self.check_block(&s.body, env, class_ctx);
                    self.check_block(&s.orelse, env, class_ctx);
                }
                ast::Stmt::For(s) => {
                    self.infer_expr(&s.iter, env);
                    let mut names = BTreeSet::new();
                    super::symbols::store_names(&s.target, &mut names);
                    for n in names {
                        env.locals.insert(n, Val::Unknown);
                    }
                    self.check_block(&s.body, env, class_ctx);
                    self.check_block(&s.orelse, env, class_ctx);
                }
                ast::Stmt::With(s) => {
                    for item in &s.items {
                        self.infer_expr(&item.context_expr, env);
                        if let Some(v) = &item.optional_vars {
                            let mut names = BTreeSet::new();
                            super::symbols::store_names(v, &mut names);
                            for n in names {
                                env.locals.insert(n, Val::Unknown);
                            }
                        }
                    }
                    self.check_block(&s.body, env, class_ctx);
                }
                ast::Stmt::Try(s) => {
                    self.check_block(&s.body, env, class_ctx);
                    for h in &s.handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        if let Some(n) = &h.name {
                            env.locals.insert(n.to_string(), Val::Unknown);
                        }
                        self.check_block(&h.body, env, class_ctx);
                    }
                    self.check_block(&s.orelse, env, class_ctx);
                    self.check_block(&s.finalbody, env, class_ctx);
                }
                ast::Stmt::Return(r) => {
                    if let Some(v) = &r.value {
                        self.infer_expr(v, env);
                    }
                }
                ast::Stmt::Raise(r) => {
                    if let Some(e) = &r.exc {
                        self.infer_expr(e, env);
                    }
                }
                ast::Stmt::Assert(a) => {
                    self.infer_expr(&a.test, env);
                }
                ast::Stmt::Global(g) => {
                    for n in &g.names {
                        env.globals_decl.insert(n.to_string());
                    }
                }
                _ => {}
            }
        }
    }

    /// `x = []` without annotation at module/class level.
    fn check_var_annotated(&mut self, a: &ast::StmtAssign, _class_ctx: Option<&str>, env: &Env) {
        if env.in_function {
            return;
        }
        let empty = match a.value.as_ref() {
            ast::Expr::List(l) => l.elts.is_empty(),
            ast::Expr::Dict(d) => d.values.is_empty(),
            ast::Expr::Call(c) => {
                matches!(c.func.as_ref(), ast::Expr::Name(n) if n.id.as_str() == "set")
                    && c.args.is_empty()
            }
            _ => false,
        };
        if !empty {
            return;
        }
        for t in &a.targets {
            if let ast::Expr::Name(n) = t {
                self.emit(
                    self.line_of(a.range),
                    "var-annotated",
                    format!("Need type annotation for \"{}\"", n.id),
                );
            }
        }
    }

    fn check_function(
        &mut self,
        name: &str,
        args: &ast::Arguments,
        body: &[ast::Stmt],
        returns: Option<&ast::Expr>,
        class_ctx: Option<&str>,
    ) {
        let mut env = Env {
            locals: BTreeMap::new(),
            ann_locals: BTreeMap::new(),
            declared: BTreeSet::new(),
            globals_decl: BTreeSet::new(),
            self_class: class_ctx.map(|c| (self.module.clone(), c.to_string())),
            in_function: true,
        };
        for (i, (arg, _, _, _)) in params_with_meta(args).iter().enumerate() {
            env.declared.insert(arg.arg.to_string());
            let is_self = class_ctx.is_some()
                && i == 0
                && (arg.arg.as_str() == "self" || arg.arg.as_str() == "cls");
            if is_self {
                continue;
            }
            let val = arg
                .annotation
                .as_deref()
                .and_then(|a| parse_ann(self.src, a))
                .map(Val::Known)
                .unwrap_or(Val::Unknown);
            env.locals.insert(arg.arg.to_string(), val);
        }
        collect_fn_declared(body, &mut env.declared, &mut env.globals_decl);

        let func_sym = match class_ctx {
            Some(c) => self
                .project
                .module(&self.module)
                .and_then(|m| m.classes.get(c))
                .and_then(|cs| cs.methods.get(name))
                .cloned(),
            None => self
                .project
                .module(&self.module)
                .and_then(|m| m.functions.get(name))
                .cloned(),
        };
        let ret_ann = returns.and_then(|r| parse_ann(self.src, r));
        let is_generator = func_sym.as_ref().map(|f| f.is_generator).unwrap_or(false);
        self.check_fn_block(body, &mut env, ret_ann.as_ref(), is_generator);
    }

    fn check_fn_block(
        &mut self,
        body: &[ast::Stmt],
        env: &mut Env,
        ret_ann: Option<&NormalizedType>,
        is_generator: bool,
    ) {
        for stmt in body {
            match stmt {
                ast::Stmt::Return(r) => {
                    if is_generator || ret_ann.map(|t| t.is_any()).unwrap_or(true) {
                        if let Some(v) = &r.value {
                            self.infer_expr(v, env);
                        }
                        continue;
                    }
                    let want = ret_ann.unwrap();
                    match &r.value {
                        None => {
                            let allows_none = want.head() == "None"
                                || want
                                    .union_members()
                                    .iter()
                                    .any(|m| matches!(m, TypeNode::Named { head, .. } if head == "None"));
                            if !allows_none {
                                self.emit(
                                    self.line_of(r.range),
                                    "return-value",
                                    "Return value expected".to_string(),
                                );
                            }
                        }
                        Some(v) => {
                            let val = self.infer_expr(v, env);
                            if let Some(got) = val.known() {
                                if !self.assignable(got, want) {
                                    self.emit(
                                        self.line_of(r.range),
                                        "return-value",
                                        format!(
                                            "Incompatible return value type (got \"{}\", expected \"{}\")",
                                            got.text, want.text
                                        ),
                                    );
                                }
                            }
                        }
                    }
                }
                ast::Stmt::Assign(a) => {
                    let val = self.infer_expr(&a.value, env);
                    for t in &a.targets {
                        self.check_assign_target(t, &val, env, None, self.line_of(a.range));
                    }
                }
                ast::Stmt::AnnAssign(a) => {
                    self.check_annotation_expr(&a.annotation, env);
                    let ann = parse_ann(self.src, &a.annotation);
                    if let Some(value) = &a.value {
                        let val = self.infer_expr(value, env);
                        if let (Some(got), Some(want)) = (val.known(), &ann) {
                            if !self.assignable(got, want) {
                                self.emit(
                                    self.line_of(a.range),
                                    "assignment",
                                    format!(
                                        "Incompatible types in assignment (expression has type \"{}\", variable has type \"{}\")",
                                        got.text, want.text
                                    ),
                                );
                            }
                        }
                    }
                    if let (ast::Expr::Name(n), Some(t)) = (a.target.as_ref(), ann) {
                        env.ann_locals.insert(n.id.to_string(), t.clone());
                        env.locals.insert(n.id.to_string(), Val::Known(t));
                    }
                }
                ast::Stmt::AugAssign(a) => {
                    self.infer_expr(&a.target, env);
                    self.infer_expr(&a.value, env);
                }
                ast::Stmt::Expr(e) => {
                    self.infer_expr(&e.value, env);
                }
                ast::Stmt::If(s) => {
                    self.infer_expr(&s.test, env);
                    self.check_fn_block(&s.body, env, ret_ann, is_generator);
                    self.check_fn_block(&s.orelse, env, ret_ann, is_generator);
                }
                ast::Stmt::While(s) => {
                    self.infer_expr(&s.test, env);
                    self.check_fn_block(&s.body, env, ret_ann, is_generator);
                    self.check_fn_block(&s.orelse, env, ret_ann, is_generator);
                }
                ast::Stmt::For(s) => {
                    self.infer_expr(&s.iter, env);
                    let mut names = BTreeSet::new();
                    super::symbols::store_names(&s.target, &mut names);
                    for n in names {
                        env.locals.insert(n, Val::Unknown);
                    }
                    self.check_fn_block(&s.body, env, ret_ann, is_generator);
                    self.check_fn_block(&s.orelse, env, ret_ann, is_generator);
                }
                ast::Stmt::With(s) => {
                    for item in &s.items {
                        self.infer_expr(&item.context_expr, env);
                        if let Some(v) = &item.optional_vars {
                            let mut names = BTreeSet::new();
                            super::symbols::store_names(v, &mut names);
                            for n in names {
                                env.locals.insert(n, Val::Unknown);
                            }
                        }
                    }
                    self.check_fn_block(&s.body, env, ret_ann, is_generator);
                }
                ast::Stmt::AsyncWith(s) => {
                    for item in &s.items {
                        self.infer_expr(&item.context_expr, env);
                        if let Some(v) = &item.optional_vars {
                            let mut names = BTreeSet::new();
                            super::symbols::store_names(v, &mut names);
                            for n in names {
                                env.locals.insert(n, Val::Unknown);
                            }
                        }
                    }
                    self.check_fn_block(&s.body, env, ret_ann, is_generator);
                }
                ast::Stmt::Try(s) => {
                    self.check_fn_block(&s.body, env, ret_ann, is_generator);
                    for h in &s.handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        if let Some(n) = &h.name {
                            env.locals.insert(n.to_string(), Val::Unknown);
                        }
                        self.check_fn_block(&h.body, env, ret_ann, is_generator);
                    }
                    self.check_fn_block(&s.orelse, env, ret_ann, is_generator);
                    self.check_fn_block(&s.finalbody, env, ret_ann, is_generator);
                }
                ast::Stmt::Raise(r) => {
                    if let Some(e) = &r.exc {
                        self.infer_expr(e, env);
                    }
                }
                ast::Stmt::Assert(a) => {
                    self.infer_expr(&a.test, env);
                }
                ast::Stmt::Global(g) => {
                    for n in &g.names {
                        env.globals_decl.insert(n.to_string());
                    }
                }
                // Nested defs keep their own scope; only names leak.
                ast::Stmt::FunctionDef(f) => {
                    env.locals.insert(f.name.to_string(), Val::Unknown);
                }
                ast::Stmt::AsyncFunctionDef(f) => {
                    env.locals.insert(f.name.to_string(), Val::Unknown);
                }
                _ => {}
            }
        }
    }

    fn check_assign_target(
        &mut self,
        target: &ast::Expr,
        val: &Val,
        env: &mut Env,
        class_ctx: Option<&str>,
        line: u32,
    ) {
        match target {
            ast::Expr::Name(n) => {
                let name = n.id.to_string();
                let declared_ann = if env.in_function && !env.globals_decl.contains(&name) {
                    env.ann_locals.get(&name).cloned()
                } else {
                    // Module var (or global-declared write from a function).
                    let ann = match class_ctx {
                        Some(c) => self
                            .project
                            .module(&self.module)
                            .and_then(|m| m.classes.get(c))
                            .and_then(|cs| cs.attrs.get(&name))
                            .cloned()
                            .flatten(),
                        None => self
                            .project
                            .resolve_var(&self.module, &name)
                            .cloned()
                            .flatten(),
                    };
                    ann
                };
                if let (Some(got), Some(want)) = (val.known(), &declared_ann) {
                    if !self.assignable(got, want) {
                        self.emit(
                            line,
                            "assignment",
                            format!(
                                "Incompatible types in assignment (expression has type \"{}\", variable has type \"{}\")",
                                got.text, want.text
                            ),
                        );
                    }
                }
                if env.in_function {
                    env.locals.insert(name, val.clone());
                }
            }
            ast::Expr::Attribute(at) => {
                // self.x or obj.x with a known annotation.
                let base = self.infer_expr(&at.value, env);
                let ann = match &base {
                    Val::Known(t) => {
                        if let Some((m, c)) = self.resolve_user_class(t.head()) {
                            self.project
                                .class_attr_ann(&m, c, at.attr.as_str())
                                .cloned()
                                .flatten()
                        } else {
                            None
                        }
                    }
                    Val::ClassObj(m, c) => self
                        .project
                        .module(m)
                        .and_then(|ms| ms.classes.get(c))
                        .and_then(|cs| cs.attrs.get(at.attr.as_str()))
                        .cloned()
                        .flatten(),
                    Val::Module(m) => self
                        .project
                        .module(m)
                        .and_then(|ms| ms.vars.get(at.attr.as_str()))
                        .cloned()
                        .flatten(),
                    _ => None,
                };
                if let (Some(got), Some(want)) = (val.known(), &ann) {
                    if !self.assignable(got, want) {
                        self.emit(
                            line,
                            "assignment",
                            format!(
                                "Incompatible types in assignment (expression has type \"{}\", variable has type \"{}\")",
                                got.text, want.text
                            ),
                        );
                    }
                }
            }
            ast::Expr::Tuple(t) => {
                for e in &t.elts {
                    if let ast::Expr::Name(n) = e {
                        if env.in_function {
                            env.locals.insert(n.id.to_string(), Val::Unknown);
                        }
                    }
                }
            }
            _ => {}
        }
    }

    /// Resolve a type head to a user class visible from this module.
    fn resolve_user_class(&self, head: &str) -> Option<(String, &'p ClassSym)> {
        let (m, c) = self.project.resolve_class(self.module_str(), head)?;
        Some((m.to_string(), c))
    }

    fn module_str(&self) -> &'p str {
        // `module` is owned by the checker but the project outlives it;
        // look the interned name up in the project map.
        self.project
            .modules
            .get_key_value(&self.module)
            .map(|(k, _)| k.as_str())
            .unwrap_or("")
    }

    fn check_annotation_sites(
        &mut self,
        args: &ast::Arguments,
        returns: Option<&ast::Expr>,
        env: &Env,
    ) {
        for (arg, _, _, _) in params_with_meta(args) {
            if let Some(ann) = &arg.annotation {
                self.check_annotation_expr(ann, env);
            }
        }
        if let Some(r) = returns {
            self.check_annotation_expr(r, env);
        }
    }

    /// Verify every root name of an annotation resolves.
    fn check_annotation_expr(&mut self, ann: &ast::Expr, env: &Env) {
        let line = self.line_of(ann.range());
        let mut names = BTreeSet::new();
        collect_annotation_roots(ann, &mut names);
        for name in names {
            if !self.name_resolves(&name, env) {
                self.emit(line, "name-defined", format!("Name \"{name}\" is not defined"));
            }
        }
    }

    fn name_resolves(&self, name: &str, env: &Env) -> bool {
        if env.declared.contains(name)
            || env.locals.contains_key(name)
            || PY_BUILTINS.contains(&name)
        {
            return true;
        }
        if let Some((_, c)) = &env.self_class {
            if name == c {
                return true;
            }
        }
        self.project
            .module(&self.module)
            .map(|m| m.declared.contains(name))
            .unwrap_or(false)
    }

    fn infer_expr(&mut self, expr: &ast::Expr, env: &mut Env) -> Val {
        match expr {
            ast::Expr::Constant(c) => constant_val(&c.value),
            ast::Expr::Name(n) => self.resolve_name_val(n, env),
            ast::Expr::Attribute(at) => {
                let base = self.infer_expr(&at.value, env);
                self.infer_attribute(&base, at.attr.as_str(), self.line_of(at.range))
            }
            ast::Expr::Call(c) => self.infer_call(c, env),
            ast::Expr::BinOp(b) => {
                let l = self.infer_expr(&b.left, env);
                let r = self.infer_expr(&b.right, env);
                self.infer_binop(&l, &r, &b.op, self.line_of(b.range))
            }
            ast::Expr::UnaryOp(u) => {
                let v = self.infer_expr(&u.operand, env);
                match u.op {
                    ast::UnaryOp::Not => Val::Known(named("bool")),
                    ast::UnaryOp::USub | ast::UnaryOp::UAdd | ast::UnaryOp::Invert => v,
                }
            }
            ast::Expr::Compare(c) => {
                self.infer_expr(&c.left, env);
                for cmp in &c.comparators {
                    self.infer_expr(cmp, env);
                }
                Val::Known(named("bool"))
            }
            ast::Expr::BoolOp(b) => {
                let vals: Vec<Val> = b.values.iter().map(|v| self.infer_expr(v, env)).collect();
                same_known(&vals)
            }
            ast::Expr::IfExp(i) => {
                self.infer_expr(&i.test, env);
                let a = self.infer_expr(&i.body, env);
                let b = self.infer_expr(&i.orelse, env);
                same_known(&[a, b])
            }
            ast::Expr::List(l) => {
                let vals: Vec<Val> = l.elts.iter().map(|e| self.infer_expr(e, env)).collect();
                homogeneous("list", &vals)
            }
            ast::Expr::Set(s) => {
                let vals: Vec<Val> = s.elts.iter().map(|e| self.infer_expr(e, env)).collect();
                homogeneous("set", &vals)
            }
            ast::Expr::Dict(d) => {
                let keys: Vec<Val> = d
                    .keys
                    .iter()
                    .flatten()
                    .map(|e| self.infer_expr(e, env))
                    .collect();
                let values: Vec<Val> = d.values.iter().map(|e| self.infer_expr(e, env)).collect();
                match (known_elem(&keys), known_elem(&values)) {
                    (Some(k), Some(v)) if !d.values.is_empty() => Val::Known(NormalizedType {
                        text: format!("dict[{}, {}]", k.text, v.text),
                        node: TypeNode::Named {
                            head: "dict".to_string(),
                            args: vec![k.node, v.node],
                        },
                    }),
                    _ => Val::Unknown,
                }
            }
            ast::Expr::Tuple(t) => {
                for e in &t.elts {
                    self.infer_expr(e, env);
                }
                Val::Known(named("tuple"))
            }
            ast::Expr::JoinedStr(f) => {
                for v in &f.values {
                    self.infer_expr(v, env);
                }
                Val::Known(named("str"))
            }
            ast::Expr::FormattedValue(f) => {
                self.infer_expr(&f.value, env);
                Val::Known(named("str"))
            }
            ast::Expr::Subscript(s) => {
                self.infer_expr(&s.value, env);
                self.infer_expr(&s.slice, env);
                Val::Unknown
            }
            ast::Expr::NamedExpr(n) => {
                let v = self.infer_expr(&n.value, env);
                if let ast::Expr::Name(t) = n.target.as_ref() {
                    env.locals.insert(t.id.to_string(), v.clone());
                }
                v
            }
            ast::Expr::Starred(s) => {
                self.infer_expr(&s.value, env);
                Val::Unknown
            }
            ast::Expr::Await(a) => {
                self.infer_expr(&a.value, env);
                Val::Unknown
            }
            ast::Expr::Lambda(_) => Val::Unknown,
            ast::Expr::ListComp(c) => {
                self.infer_comp_generators(&c.generators, env);
                Val::Known(named("list"))
            }
            ast::Expr::SetComp(c) => {
                self.infer_comp_generators(&c.generators, env);
                Val::Known(named("set"))
            }
            ast::Expr::DictComp(c) => {
                self.infer_comp_generators(&c.generators, env);
                Val::Known(named("dict"))
            }
            ast::Expr::GeneratorExp(c) => {
                self.infer_comp_generators(&c.generators, env);
                Val::Unknown
            }
            _ => Val::Unknown,
        }
    }

    fn infer_comp_generators(&mut self, gens: &[ast::Comprehension], env: &mut Env) {
        for g in gens {
            self.infer_expr(&g.iter, env);
            let mut names = BTreeSet::new();
            super::symbols::store_names(&g.target, &mut names);
            for n in names {
                env.locals.insert(n, Val::Unknown);
            }
        }
    }

    fn resolve_name_val(&mut self, n: &ast::ExprName, env: &mut Env) -> Val {
        let name = n.id.as_str();
        if let Some(v) = env.locals.get(name) {
            return v.clone();
        }
        if let Some((m, c)) = &env.self_class {
            if name == "self" {
                return Val::Known(named(c));
            }
            if name == "cls" {
                return Val::ClassObj(m.clone(), c.clone());
            }
        }
        if let Some(module) = self.project.module(&self.module) {
            if module.classes.contains_key(name) {
                return Val::ClassObj(self.module.clone(), name.to_string());
            }
            if module.functions.contains_key(name) {
                return Val::Func(self.module.clone(), name.to_string());
            }
            if let Some(ann) = module.vars.get(name) {
                return ann.clone().map(Val::Known).unwrap_or(Val::Unknown);
            }
            if let Some(target) = module.imports.get(name) {
                return match target {
                    ImportTarget::Module(m) => Val::Module(m.clone()),
                    ImportTarget::Item { module: m, name: orig } => {
                        let Some(sm) = self.project.module(m) else {
                            return Val::Unknown;
                        };
                        if sm.classes.contains_key(orig) {
                            Val::ClassObj(m.clone(), orig.clone())
                        } else if sm.functions.contains_key(orig) {
                            Val::Func(m.clone(), orig.clone())
                        } else if let Some(ann) = sm.vars.get(orig) {
                            ann.clone().map(Val::Known).unwrap_or(Val::Unknown)
                        } else {
                            Val::Unknown
                        }
                    }
                    ImportTarget::External => Val::Unknown,
                };
            }
        }
        if BUILTIN_CTORS.contains(&name) {
            return Val::BuiltinCtor(name.to_string());
        }
        if PY_BUILTINS.contains(&name) {
            return Val::Unknown;
        }
        if !self.name_resolves(name, env) {
            self.emit(
                self.line_of(n.range),
                "name-defined",
                format!("Name \"{name}\" is not defined"),
            );
        }
        Val::Unknown
    }

    fn infer_attribute(&mut self, base: &Val, attr: &str, line: u32) -> Val {
        match base {
            Val::Known(t) => {
                let head = t.head().to_string();
                if t.is_any() || t.is_union() || head.is_empty() {
                    return Val::Unknown;
                }
                if let Some((m, class)) = self.resolve_user_class(&head) {
                    match self.project.class_has_attr(&m, class, attr) {
                        Some(false) => {
                            self.emit(
                                line,
                                "attr-defined",
                                format!("\"{head}\" has no attribute \"{attr}\""),
                            );
                            return Val::Unknown;
                        }
                        None => return Val::Unknown,
                        Some(true) => {
                            if class.methods.contains_key(attr)
                                || self.project.find_method(&m, class, attr).is_some()
                            {
                                return Val::BoundMethod(m, head, attr.to_string());
                            }
                            return self
                                .project
                                .class_attr_ann(&m, class, attr)
                                .cloned()
                                .flatten()
                                .map(Val::Known)
                                .unwrap_or(Val::Unknown);
                        }
                    }
                }
                match self.catalog.head_has_attr(&head, attr) {
                    Some(false) => {
                        self.emit(
                            line,
                            "attr-defined",
                            format!("\"{}\" has no attribute \"{attr}\"", t.text),
                        );
                        Val::Unknown
                    }
                    Some(true) => Val::BuiltinMethod {
                        recv: t.clone(),
                        name: attr.to_string(),
                    },
                    None => Val::Unknown,
                }
            }
            Val::ClassObj(m, c) => {
                let Some(class) = self.project.module(m).and_then(|ms| ms.classes.get(c)) else {
                    return Val::Unknown;
                };
                if class.methods.contains_key(attr) {
                    return Val::BoundMethod(m.clone(), c.clone(), attr.to_string());
                }
                self.project
                    .class_attr_ann(m, class, attr)
                    .cloned()
                    .flatten()
                    .map(Val::Known)
                    .unwrap_or(Val::Unknown)
            }
            Val::Module(m) => {
                let Some(ms) = self.project.module(m) else {
                    let dotted = format!("{m}.{attr}");
                    if self.project.has_module(&dotted) {
                        return Val::Module(dotted);
                    }
                    return Val::Unknown;
                };
                if ms.classes.contains_key(attr) {
                    Val::ClassObj(m.clone(), attr.to_string())
                } else if ms.functions.contains_key(attr) {
                    Val::Func(m.clone(), attr.to_string())
                } else if let Some(ann) = ms.vars.get(attr) {
                    ann.clone().map(Val::Known).unwrap_or(Val::Unknown)
                } else {
                    let dotted = format!("{m}.{attr}");
                    if self.project.has_module(&dotted) {
                        Val::Module(dotted)
                    } else {
                        Val::Unknown
                    }
                }
            }
            _ => Val::Unknown,
        }
    }

    fn infer_call(&mut self, call: &ast::ExprCall, env: &mut Env) -> Val {
        let callee = self.infer_expr(&call.func, env);
        let arg_vals: Vec<Val> = call.args.iter().map(|a| self.infer_expr(a, env)).collect();
        let kw_vals: Vec<(Option<String>, Val)> = call
            .keywords
            .iter()
            .map(|k| {
                (
                    k.arg.as_ref().map(|a| a.to_string()),
                    self.infer_expr(&k.value, env),
                )
            })
            .collect();
        let line = self.line_of(call.range);
        let has_star = call.args.iter().any(|a| matches!(a, ast::Expr::Starred(_)));
        let has_kwstar = kw_vals.iter().any(|(n, _)| n.is_none());

        match &callee {
            Val::Func(m, name) => {
                let func = self
                    .project
                    .module(m)
                    .and_then(|ms| ms.functions.get(name))
                    .cloned();
                if let Some(f) = func {
                    self.check_call(&f, name, None, &arg_vals, &kw_vals, has_star, has_kwstar, line);
                    return f.returns.clone().map(Val::Known).unwrap_or(Val::Unknown);
                }
                Val::Unknown
            }
            Val::ClassObj(m, c) => {
                let init = self
                    .project
                    .module(m)
                    .and_then(|ms| ms.classes.get(c))
                    .and_then(|cls| self.project.find_method(m, cls, "__init__"))
                    .map(|(_, f)| f.clone());
                if let Some(f) = init {
                    self.check_call(&f, c, None, &arg_vals, &kw_vals, has_star, has_kwstar, line);
                }
                Val::Known(named(c))
            }
            Val::BoundMethod(m, c, method) => {
                let func = self
                    .project
                    .module(m)
                    .and_then(|ms| ms.classes.get(c))
                    .and_then(|cls| self.project.find_method(m, cls, method))
                    .map(|(_, f)| f.clone());
                if let Some(f) = func {
                    self.check_call(
                        &f,
                        method,
                        Some(c),
                        &arg_vals,
                        &kw_vals,
                        has_star,
                        has_kwstar,
                        line,
                    );
                    return f.returns.clone().map(Val::Known).unwrap_or(Val::Unknown);
                }
                Val::Unknown
            }
            Val::BuiltinMethod { recv, name } => {
                // Typed element check for list.append.
                if name == "append" && recv.head() == "list" {
                    if let TypeNode::Named { args, .. } = &recv.node {
                        if let (Some(elem), Some(arg)) = (args.first(), arg_vals.first()) {
                            let want = NormalizedType {
                                text: render_node(elem),
                                node: elem.clone(),
                            };
                            if let Some(got) = arg.known() {
                                if !self.assignable(got, &want) {
                                    self.emit(
                                        line,
                                        "arg-type",
                                        format!(
                                            "Argument 1 to \"append\" of \"list\" has incompatible type \"{}\"; expected \"{}\"",
                                            got.text, want.text
                                        ),
                                    );
                                }
                            }
                        }
                    }
                }
                Val::Unknown
            }
            Val::BuiltinCtor(name) => {
                if let Some(ret) = builtin_call_result(name) {
                    Val::Known(named(ret))
                } else {
                    Val::Unknown
                }
            }
            Val::Known(t) if t.head() == "Callable" => {
                self.check_callable_value(t, &arg_vals, has_star, line);
                if let TypeNode::Named { args, .. } = &t.node {
                    if let Some(ret) = args.last() {
                        if !matches!(ret, TypeNode::Group(_)) {
                            return Val::Known(NormalizedType {
                                text: render_node(ret),
                                node: ret.clone(),
                            });
                        }
                    }
                }
                Val::Unknown
            }
            _ => Val::Unknown,
        }
    }

    fn check_callable_value(
        &mut self,
        t: &NormalizedType,
        arg_vals: &[Val],
        has_star: bool,
        line: u32,
    ) {
        let TypeNode::Named { args, .. } = &t.node else {
            return;
        };
        let Some(TypeNode::Group(params)) = args.first() else {
            return; // Callable[..., R]
        };
        if has_star {
            return;
        }
        if arg_vals.len() > params.len() {
            self.emit(line, "call-arg", "Too many arguments".to_string());
        } else if arg_vals.len() < params.len() {
            self.emit(line, "call-arg", "Too few arguments".to_string());
        }
        for (i, (want_node, got)) in params.iter().zip(arg_vals).enumerate() {
            let want = NormalizedType {
                text: render_node(want_node),
                node: want_node.clone(),
            };
            if want.is_any() {
                continue;
            }
            if let Some(got) = got.known() {
                if !self.assignable(got, &want) {
                    self.emit(
                        line,
                        "arg-type",
                        format!(
                            "Argument {} has incompatible type \"{}\"; expected \"{}\"",
                            i + 1,
                            got.text,
                            want.text
                        ),
                    );
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_call(
        &mut self,
        func: &FuncSym,
        display: &str,
        of_class: Option<&str>,
        arg_vals: &[Val],
        kw_vals: &[(Option<String>, Val)],
        has_star: bool,
        has_kwstar: bool,
        line: u32,
    ) {
        // Unannotated functions are dynamic; their calls are not checked.
        if !func.is_annotated {
            return;
        }
        let suffix = of_class
            .map(|c| format!(" of \"{c}\""))
            .unwrap_or_default();
        let positional: Vec<&super::symbols::ParamSym> =
            func.params.iter().filter(|p| !p.kwonly).collect();

        if !has_star && !func.vararg && arg_vals.len() > positional.len() {
            self.emit(
                line,
                "call-arg",
                format!("Too many arguments for \"{display}\"{suffix}"),
            );
        }

        for (i, got) in arg_vals.iter().enumerate() {
            let Some(param) = positional.get(i) else {
                break;
            };
            if let (Some(got), Some(want)) = (got.known(), &param.ann) {
                if !want.is_any() && !self.assignable(got, want) {
                    self.emit(
                        line,
                        "arg-type",
                        format!(
                            "Argument {} to \"{display}\"{suffix} has incompatible type \"{}\"; expected \"{}\"",
                            i + 1,
                            got.text,
                            want.text
                        ),
                    );
                }
            }
        }

        let mut seen_kw = BTreeSet::new();
        for (kw_name, got) in kw_vals {
            let Some(kw_name) = kw_name else {
                continue;
            };
            seen_kw.insert(kw_name.clone());
            match func.params.iter().find(|p| &p.name == kw_name) {
                Some(param) => {
                    if let (Some(got), Some(want)) = (got.known(), &param.ann) {
                        if !want.is_any() && !self.assignable(got, want) {
                            self.emit(
                                line,
                                "arg-type",
                                format!(
                                    "Argument \"{kw_name}\" to \"{display}\"{suffix} has incompatible type \"{}\"; expected \"{}\"",
                                    got.text, want.text
                                ),
                            );
                        }
                    }
                }
                None => {
                    if !func.kwarg && !has_kwstar {
                        self.emit(
                            line,
                            "call-arg",
                            format!("Unexpected keyword argument \"{kw_name}\" for \"{display}\"{suffix}"),
                        );
                    }
                }
            }
        }

        if !has_star && !has_kwstar {
            for (i, p) in func.params.iter().enumerate() {
                if p.has_default || seen_kw.contains(&p.name) {
                    continue;
                }
                let covered_positionally = !p.kwonly && i < arg_vals.len();
                if covered_positionally {
                    continue;
                }
                if p.kwonly {
                    self.emit(
                        line,
                        "call-arg",
                        format!("Missing named argument \"{}\" for \"{display}\"{suffix}", p.name),
                    );
                } else {
                    self.emit(
                        line,
                        "call-arg",
                        format!(
                            "Missing positional argument \"{}\" in call to \"{display}\"{suffix}",
                            p.name
                        ),
                    );
                }
            }
        }
    }

    fn infer_binop(&mut self, l: &Val, r: &Val, op: &ast::Operator, line: u32) -> Val {
        let (Some(lt), Some(rt)) = (l.known(), r.known()) else {
            return Val::Unknown;
        };
        let (lh, rh) = (lt.head(), rt.head());
        if !BASIC_OPERAND_HEADS.contains(&lh) || !BASIC_OPERAND_HEADS.contains(&rh) {
            return Val::Unknown;
        }
        let result = binop_result(lh, rh, op);
        match result {
            Some(head) => Val::Known(named(head)),
            None => {
                let symbol = op_symbol(op);
                if symbol.is_empty() {
                    return Val::Unknown;
                }
                self.emit(
                    line,
                    "operator",
                    format!("Unsupported operand types for {symbol} (\"{}\" and \"{}\")", lt.text, rt.text),
                );
                Val::Unknown
            }
        }
    }

    fn check_overrides(&mut self, c: &ast::StmtClassDef) {
        let mut pending: Vec<(String, FuncSym, FuncSym, String)> = Vec::new();
        {
            let Some(class) = self
                .project
                .module(&self.module)
                .and_then(|m| m.classes.get(c.name.as_str()))
            else {
                return;
            };
            for base_expr in &c.bases {
                let base_name = match base_expr {
                    ast::Expr::Name(n) => n.id.to_string(),
                    ast::Expr::Attribute(a) => a.attr.to_string(),
                    _ => continue,
                };
                let Some((bm, base)) = self.project.resolve_class(self.module_str(), &base_name)
                else {
                    continue;
                };
                for (mname, child_m) in &class.methods {
                    if matches!(
                        mname.as_str(),
                        "__init__" | "__new__" | "__init_subclass__" | "__class_getitem__"
                    ) {
                        continue;
                    }
                    let Some((_, parent_m)) = self.project.find_method(bm, base, mname) else {
                        continue;
                    };
                    if !child_m.is_annotated || !parent_m.is_annotated {
                        continue;
                    }
                    pending.push((
                        mname.clone(),
                        child_m.clone(),
                        parent_m.clone(),
                        base_name.clone(),
                    ));
                }
            }
        }
        for (mname, child_m, parent_m, base_name) in pending {
            self.check_one_override(&mname, &child_m, &parent_m, &base_name);
        }
    }

    fn check_one_override(
        &mut self,
        mname: &str,
        child: &FuncSym,
        parent: &FuncSym,
        base_name: &str,
    ) {
        let line = child.def_line;
        let child_pos: Vec<_> = child.params.iter().filter(|p| !p.kwonly).collect();
        let parent_pos: Vec<_> = parent.params.iter().filter(|p| !p.kwonly).collect();

        if !child.vararg && child_pos.len() < parent_pos.len() {
            self.emit(
                line,
                "override",
                format!("Signature of \"{mname}\" incompatible with supertype \"{base_name}\""),
            );
            return;
        }
        if child_pos.len() > parent_pos.len()
            && child_pos[parent_pos.len()..].iter().any(|p| !p.has_default)
        {
            self.emit(
                line,
                "override",
                format!("Signature of \"{mname}\" incompatible with supertype \"{base_name}\""),
            );
            return;
        }

        for (i, (cp, pp)) in child_pos.iter().zip(&parent_pos).enumerate() {
            if let (Some(ct), Some(pt)) = (&cp.ann, &pp.ann) {
                if ct.is_any() || pt.is_any() {
                    continue;
                }
                // Contravariance: the child must accept at least what the
                // parent accepts.
                if !self.assignable(pt, ct) {
                    self.emit(
                        line,
                        "override",
                        format!(
                            "Argument {} of \"{mname}\" is incompatible with supertype \"{base_name}\"; supertype defines the argument type as \"{}\"",
                            i + 1,
                            pt.text
                        ),
                    );
                }
            }
        }
        if let (Some(ct), Some(pt)) = (&child.returns, &parent.returns) {
            if !ct.is_any() && !pt.is_any() && !self.assignable(ct, pt) {
                self.emit(
                    line,
                    "override",
                    format!(
                        "Return type \"{}\" of \"{mname}\" incompatible with return type \"{}\" in supertype \"{base_name}\"",
                        ct.text, pt.text
                    ),
                );
            }
        }
    }

    /// Gradual assignability over canonical types.
    fn assignable(&self, a: &NormalizedType, b: &NormalizedType) -> bool {
        assignable_types(a, b, self.project, &self.module)
    }
}

const BASIC_OPERAND_HEADS: &[&str] = &[
    "int", "float", "bool", "complex", "str", "bytes", "list", "tuple", "dict", "set", "None",
];

const BUILTIN_CTORS: &[&str] = &[
    "int", "float", "complex", "bool", "str", "bytes", "bytearray", "list", "dict", "set",
    "frozenset", "tuple", "range", "type", "object",
];

fn builtin_call_result(name: &str) -> Option<&'static str> {
    BUILTIN_CTORS
        .iter()
        .find(|c| **c == name)
        .copied()
        .or(match name {
            "len" => Some("int"),
            "repr" => Some("str"),
            "sorted" => Some("list"),
            "isinstance" | "issubclass" | "callable" | "hasattr" => Some("bool"),
            _ => None,
        })
}

fn named(head: &str) -> NormalizedType {
    NormalizedType {
        text: head.to_string(),
        node: TypeNode::Named {
            head: head.to_string(),
            args: vec![],
        },
    }
}

fn render_node(node: &TypeNode) -> String {
    match node {
        TypeNode::Named { head, args } => {
            if args.is_empty() {
                head.clone()
            } else {
                let inner: Vec<String> = args.iter().map(render_node).collect();
                format!("{}[{}]", head, inner.join(", "))
            }
        }
        TypeNode::Group(items) => {
            let inner: Vec<String> = items.iter().map(render_node).collect();
            format!("[{}]", inner.join(", "))
        }
        TypeNode::Ellipsis => "...".to_string(),
        TypeNode::LiteralArg(s) => s.clone(),
    }
}

fn constant_val(c: &ast::Constant) -> Val {
    let head = match c {
        ast::Constant::Int(_) => "int",
        ast::Constant::Float(_) => "float",
        ast::Constant::Complex { .. } => "complex",
        ast::Constant::Str(_) => "str",
        ast::Constant::Bytes(_) => "bytes",
        ast::Constant::Bool(_) => "bool",
        ast::Constant::None => "None",
        ast::Constant::Ellipsis | ast::Constant::Tuple(_) => return Val::Unknown,
    };
    Val::Known(named(head))
}

/// The single shared known type of a list of values, if any.
fn known_elem(vals: &[Val]) -> Option<NormalizedType> {
    let known: Vec<&NormalizedType> = vals.iter().filter_map(|v| v.known()).collect();
    if known.is_empty() || known.len() != vals.len() {
        return None;
    }
    let first = known[0];
    known
        .iter()
        .all(|t| t.text == first.text)
        .then(|| first.clone())
}

fn same_known(vals: &[Val]) -> Val {
    let mut known = vals.iter().filter_map(|v| v.known());
    let Some(first) = known.next() else {
        return Val::Unknown;
    };
    if vals.len() == vals.iter().filter_map(|v| v.known()).count()
        && known.all(|t| t.text == first.text)
    {
        Val::Known(first.clone())
    } else {
        Val::Unknown
    }
}

/// `list[T]`-style type for a homogeneous known literal; bare head
/// otherwise unknown (empty literals stay unknown to avoid noise).
fn homogeneous(head: &str, vals: &[Val]) -> Val {
    if vals.is_empty() {
        return Val::Unknown;
    }
    let known: Vec<&NormalizedType> = vals.iter().filter_map(|v| v.known()).collect();
    if known.len() != vals.len() {
        return Val::Known(named(head));
    }
    let first = known[0];
    if known.iter().all(|t| t.text == first.text) {
        Val::Known(NormalizedType {
            text: format!("{head}[{}]", first.text),
            node: TypeNode::Named {
                head: head.to_string(),
                args: vec![first.node.clone()],
            },
        })
    } else {
        Val::Known(named(head))
    }
}

fn op_symbol(op: &ast::Operator) -> &'static str {
    match op {
        ast::Operator::Add => "+",
        ast::Operator::Sub => "-",
        ast::Operator::Mult => "*",
        ast::Operator::Div => "/",
        ast::Operator::FloorDiv => "//",
        ast::Operator::Mod => "%",
        ast::Operator::Pow => "**",
        _ => "",
    }
}

fn is_num(h: &str) -> bool {
    matches!(h, "int" | "float" | "bool" | "complex")
}

fn num_join(a: &str, b: &str) -> &'static str {
    if a == "complex" || b == "complex" {
        "complex"
    } else if a == "float" || b == "float" {
        "float"
    } else {
        "int"
    }
}

fn binop_result(l: &str, r: &str, op: &ast::Operator) -> Option<&'static str> {
    use ast::Operator::*;
    match op {
        Add => match (l, r) {
            _ if is_num(l) && is_num(r) => Some(num_join(l, r)),
            ("str", "str") => Some("str"),
            ("bytes", "bytes") => Some("bytes"),
            ("list", "list") => Some("list"),
            ("tuple", "tuple") => Some("tuple"),
            _ => None,
        },
        Sub | Pow => (is_num(l) && is_num(r)).then(|| num_join(l, r)),
        FloorDiv => (is_num(l) && is_num(r)).then(|| num_join(l, r)),
        Mod => {
            if l == "str" {
                Some("str") // % formatting
            } else if is_num(l) && is_num(r) {
                Some(num_join(l, r))
            } else {
                None
            }
        }
        Mult => match (l, r) {
            _ if is_num(l) && is_num(r) => Some(num_join(l, r)),
            ("str", "int") | ("int", "str") | ("str", "bool") => Some("str"),
            ("list", "int") | ("int", "list") => Some("list"),
            ("tuple", "int") | ("int", "tuple") => Some("tuple"),
            ("bytes", "int") | ("int", "bytes") => Some("bytes"),
            _ => None,
        },
        Div => (is_num(l) && is_num(r)).then(|| if l == "complex" || r == "complex" { "complex" } else { "float" }),
        // Bit and shift operators stay silent to avoid false positives.
        _ => None,
    }
}

/// Heads assignable to abstract container heads (first type argument is
/// checked covariantly when both sides carry arguments).
fn abc_accepts(concrete: &str, abstract_head: &str) -> bool {
    let iterables = [
        "list", "set", "frozenset", "tuple", "dict", "str", "bytes", "range", "deque",
    ];
    match abstract_head {
        "Iterable" | "Collection" | "Sized" | "Container" | "Reversible" => {
            iterables.contains(&concrete)
        }
        "Sequence" => matches!(concrete, "list" | "tuple" | "str" | "bytes" | "range" | "deque"),
        "MutableSequence" => matches!(concrete, "list" | "deque"),
        "Mapping" | "MutableMapping" => matches!(concrete, "dict" | "defaultdict" | "OrderedDict" | "Counter"),
        "Iterator" | "Generator" => false,
        "Hashable" => matches!(concrete, "int" | "float" | "str" | "bytes" | "tuple" | "bool" | "frozenset"),
        _ => false,
    }
}

fn node_type(node: &TypeNode) -> NormalizedType {
    NormalizedType {
        text: render_node(node),
        node: node.clone(),
    }
}

fn assignable_types(a: &NormalizedType, b: &NormalizedType, p: &Project, module: &str) -> bool {
    if a.is_any() || b.is_any() {
        return true;
    }
    if a.text == b.text {
        return true;
    }
    if b.head() == "object" {
        return true;
    }
    // Literal values behave like unknowns here.
    if a.head() == "Literal" || b.head() == "Literal" {
        return true;
    }
    if b.is_union() {
        return b
            .union_members()
            .iter()
            .any(|m| assignable_types(a, &node_type(m), p, module));
    }
    if a.is_union() {
        return a
            .union_members()
            .iter()
            .all(|m| assignable_types(&node_type(m), b, p, module));
    }

    let (ah, bh) = (a.head(), b.head());
    // Numeric tower, counting bool <: int.
    let order = |h: &str| match h {
        "bool" => Some(0),
        "int" => Some(1),
        "float" => Some(2),
        "complex" => Some(3),
        _ => None,
    };
    if let (Some(ao), Some(bo)) = (order(ah), order(bh)) {
        if ao <= bo {
            return true;
        }
    }

    let (a_args, b_args) = (type_args(a), type_args(b));
    if ah == bh {
        // Bare heads are gradual; parametrized builtins are invariant,
        // abstract containers covariant.
        if a_args.is_empty() || b_args.is_empty() {
            return true;
        }
        if a_args.len() != b_args.len() {
            return true;
        }
        let invariant = matches!(ah, "list" | "dict" | "set" | "frozenset");
        return a_args.iter().zip(&b_args).all(|(x, y)| {
            let (xt, yt) = (node_type(x), node_type(y));
            if yt.is_any() || xt.is_any() {
                return true;
            }
            if invariant {
                xt.text == yt.text
            } else {
                assignable_types(&xt, &yt, p, module)
            }
        });
    }

    if abc_accepts(ah, bh) {
        return match (a_args.first(), b_args.first()) {
            (Some(x), Some(y)) => {
                assignable_types(&node_type(x), &node_type(y), p, module)
            }
            _ => true,
        };
    }

    if ah == "Callable" && bh == "Callable" {
        return true;
    }

    // User classes by nominal subtyping.
    p.is_subclass(module, ah, bh)
}

fn type_args(t: &NormalizedType) -> Vec<TypeNode> {
    match &t.node {
        TypeNode::Named { args, .. } => args.clone(),
        _ => vec![],
    }
}

fn collect_annotation_roots(e: &ast::Expr, out: &mut BTreeSet<String>) {
    match e {
        ast::Expr::Name(n) => {
            out.insert(n.id.to_string());
        }
        ast::Expr::Attribute(a) => {
            let mut base = a.value.as_ref();
            while let ast::Expr::Attribute(inner) = base {
                base = inner.value.as_ref();
            }
            if let ast::Expr::Name(n) = base {
                out.insert(n.id.to_string());
            }
        }
        ast::Expr::Subscript(s) => {
            collect_annotation_roots(&s.value, out);
            collect_annotation_roots(&s.slice, out);
        }
        ast::Expr::Tuple(t) => t.elts.iter().for_each(|e| collect_annotation_roots(e, out)),
        ast::Expr::List(l) => l.elts.iter().for_each(|e| collect_annotation_roots(e, out)),
        ast::Expr::BinOp(b) => {
            collect_annotation_roots(&b.left, out);
            collect_annotation_roots(&b.right, out);
        }
        ast::Expr::Constant(c) => {
            if let ast::Constant::Str(s) = &c.value {
                if let Ok(ast::Mod::Expression(m)) =
                    rustpython_parser::parse(s, rustpython_parser::Mode::Expression, "<ann>")
                {
                    collect_annotation_roots(&m.body, out);
                }
            }
        }
        _ => {}
    }
}

fn collect_fn_declared(
    body: &[ast::Stmt],
    declared: &mut BTreeSet<String>,
    globals_decl: &mut BTreeSet<String>,
) {
    for stmt in body {
        match stmt {
            ast::Stmt::Global(g) => {
                for n in &g.names {
                    globals_decl.insert(n.to_string());
                    declared.insert(n.to_string());
                }
            }
            ast::Stmt::Nonlocal(g) => {
                for n in &g.names {
                    declared.insert(n.to_string());
                }
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    super::symbols::store_names(t, declared);
                }
                collect_expr_declared(&a.value, declared);
            }
            ast::Stmt::AnnAssign(a) => super::symbols::store_names(&a.target, declared),
            ast::Stmt::AugAssign(a) => super::symbols::store_names(&a.target, declared),
            ast::Stmt::For(s) => {
                super::symbols::store_names(&s.target, declared);
                collect_fn_declared(&s.body, declared, globals_decl);
                collect_fn_declared(&s.orelse, declared, globals_decl);
            }
            ast::Stmt::While(s) => {
                collect_fn_declared(&s.body, declared, globals_decl);
                collect_fn_declared(&s.orelse, declared, globals_decl);
            }
            ast::Stmt::If(s) => {
                collect_fn_declared(&s.body, declared, globals_decl);
                collect_fn_declared(&s.orelse, declared, globals_decl);
            }
            ast::Stmt::With(s) => {
                for item in &s.items {
                    if let Some(v) = &item.optional_vars {
                        super::symbols::store_names(v, declared);
                    }
                }
                collect_fn_declared(&s.body, declared, globals_decl);
            }
            ast::Stmt::AsyncWith(s) => {
                for item in &s.items {
                    if let Some(v) = &item.optional_vars {
                        super::symbols::store_names(v, declared);
                    }
                }
                collect_fn_declared(&s.body, declared, globals_decl);
            }
            ast::Stmt::Try(s) => {
                collect_fn_declared(&s.body, declared, globals_decl);
                for h in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    if let Some(n) = &h.name {
                        declared.insert(n.to_string());
                    }
                    collect_fn_declared(&h.body, declared, globals_decl);
                }
                collect_fn_declared(&s.orelse, declared, globals_decl);
                collect_fn_declared(&s.finalbody, declared, globals_decl);
            }
            ast::Stmt::FunctionDef(f) => {
                declared.insert(f.name.to_string());
                for (arg, ..) in params_with_meta(&f.args) {
                    declared.insert(arg.arg.to_string());
                }
                collect_fn_declared(&f.body, declared, globals_decl);
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                declared.insert(f.name.to_string());
                for (arg, ..) in params_with_meta(&f.args) {
                    declared.insert(arg.arg.to_string());
                }
                collect_fn_declared(&f.body, declared, globals_decl);
            }
            ast::Stmt::Expr(e) => collect_expr_declared(&e.value, declared),
            ast::Stmt::Return(r) => {
                if let Some(v) = &r.value {
                    collect_expr_declared(v, declared);
                }
            }
            _ => {}
        }
    }
}

fn collect_expr_declared(e: &ast::Expr, declared: &mut BTreeSet<String>) {
    match e {
        ast::Expr::NamedExpr(n) => {
            super::symbols::store_names(&n.target, declared);
            collect_expr_declared(&n.value, declared);
        }
        ast::Expr::ListComp(c) => {
            for g in &c.generators {
                super::symbols::store_names(&g.target, declared);
            }
        }
        ast::Expr::SetComp(c) => {
            for g in &c.generators {
                super::symbols::store_names(&g.target, declared);
            }
        }
        ast::Expr::DictComp(c) => {
            for g in &c.generators {
                super::symbols::store_names(&g.target, declared);
            }
        }
        ast::Expr::GeneratorExp(c) => {
            for g in &c.generators {
                super::symbols::store_names(&g.target, declared);
            }
        }
        ast::Expr::Lambda(l) => {
            for (arg, ..) in params_with_meta(&l.args) {
                declared.insert(arg.arg.to_string());
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(files: &[(&str, &str)]) -> Vec<Finding> {
        let repo = SourceRepo::from_files(
            files
                .iter()
                .map(|(p, t)| (p.to_string(), t.to_string()))
                .collect(),
        );
        check_repo(&repo)
    }

    fn codes(findings: &[Finding]) -> Vec<&str> {
        findings.iter().map(|f| f.code.as_str()).collect()
    }

    #[test]
    fn clean_unannotated_repo_is_quiet() {
        let findings = check(&[(
            "m.py",
            "def add(a, b):\n    return a + b\n\n\ndef use():\n    return add(1, 2)\n",
        )]);
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn arg_type_at_call_site() {
        let findings = check(&[(
            "m.py",
            "def scale(factor: str):\n    return factor\n\n\ndef use():\n    return scale(3)\n",
        )]);
        assert_eq!(codes(&findings), vec!["arg-type"]);
        assert!(findings[0].message.contains("to \"scale\""));
        assert_eq!(findings[0].line, 6);
    }

    #[test]
    fn unannotated_calls_are_dynamic() {
        let findings = check(&[(
            "m.py",
            "def scale(factor):\n    return factor\n\n\ndef use():\n    return scale(3, 4, 5)\n",
        )]);
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn call_arg_arity_on_annotated() {
        let findings = check(&[(
            "m.py",
            "def ping(host: str, timeout: int = 5):\n    return host\n\n\ndef use():\n    return ping('h', retries=3)\n",
        )]);
        assert_eq!(codes(&findings), vec!["call-arg"]);
        assert!(findings[0].message.contains("retries"));
    }

    #[test]
    fn return_value_mismatch() {
        let findings = check(&[("m.py", "def h() -> str:\n    return 3\n")]);
        assert_eq!(codes(&findings), vec!["return-value"]);
    }

    #[test]
    fn name_defined_in_annotation() {
        let findings = check(&[("m.py", "def g(x: UnknownWidget):\n    return x\n")]);
        assert_eq!(codes(&findings), vec!["name-defined"]);
        assert!(findings[0].message.contains("UnknownWidget"));
        assert_eq!(findings[0].line, 1);
    }

    #[test]
    fn name_defined_in_code() {
        let findings = check(&[("m.py", "def f():\n    return missing_helper()\n")]);
        assert_eq!(codes(&findings), vec!["name-defined"]);
    }

    #[test]
    fn attr_defined_on_builtin() {
        let findings = check(&[(
            "m.py",
            "def f(x: str):\n    return x.reverse()\n",
        )]);
        assert_eq!(codes(&findings), vec!["attr-defined"]);
    }

    #[test]
    fn attr_defined_on_user_class() {
        let findings = check(&[(
            "m.py",
            "class Widget:\n    def spin(self):\n        return 1\n\n\ndef f(w: Widget):\n    return w.twirl()\n",
        )]);
        assert_eq!(codes(&findings), vec!["attr-defined"]);
        assert!(findings[0].message.contains("Widget"));
    }

    #[test]
    fn operator_mismatch_on_literals() {
        let findings = check(&[("m.py", "total = 1 + 'one'\n")]);
        assert_eq!(codes(&findings), vec!["operator"]);
    }

    #[test]
    fn assignment_mismatch() {
        let findings = check(&[("m.py", "x: int = 'a'\n")]);
        assert_eq!(codes(&findings), vec!["assignment"]);
    }

    #[test]
    fn var_annotated_for_empty_containers() {
        let findings = check(&[("m.py", "registry = []\n")]);
        assert_eq!(codes(&findings), vec!["var-annotated"]);
    }

    #[test]
    fn override_param_contravariance() {
        let findings = check(&[(
            "m.py",
            "class Base:\n    def m(self, x: str) -> int:\n        return 1\n\n\nclass Child(Base):\n    def m(self, x: int) -> int:\n        return 2\n",
        )]);
        assert_eq!(codes(&findings), vec!["override"]);
        assert!(findings[0].message.contains("supertype \"Base\""));
        assert_eq!(findings[0].line, 7);
    }

    #[test]
    fn override_ok_when_compatible() {
        let findings = check(&[(
            "m.py",
            "class Base:\n    def m(self, x: int) -> int:\n        return 1\n\n\nclass Child(Base):\n    def m(self, x: int) -> int:\n        return 2\n",
        )]);
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn type_ignore_suppresses() {
        let findings = check(&[("m.py", "total = 1 + 'one'  # type: ignore\n")]);
        assert!(findings.is_empty());
    }

    #[test]
    fn callable_variable_arity() {
        let findings = check(&[(
            "m.py",
            "from typing import Callable\nprocess: Callable[[str], str] = str\n\n\ndef use(data, flags):\n    return process(data, flags)\n",
        )]);
        assert_eq!(codes(&findings), vec!["call-arg"]);
        assert_eq!(findings[0].message, "Too many arguments");
    }

    #[test]
    fn list_append_element_check() {
        let findings = check(&[(
            "m.py",
            "class Hook:\n    pass\n\n\nclass Ctx:\n    hooks: list[Hook] = []\n\n\ndef add(c: Ctx, f: int):\n    c.hooks.append(f)\n",
        )]);
        assert_eq!(codes(&findings), vec!["arg-type"]);
        assert!(findings[0].message.contains("append"));
    }

    #[test]
    fn cross_module_calls_checked() {
        let findings = check(&[
            ("pkg/__init__.py", ""),
            ("pkg/util.py", "def helper(n: int) -> int:\n    return n\n"),
            (
                "pkg/main.py",
                "from pkg.util import helper\n\n\ndef run():\n    return helper('x')\n",
            ),
        ]);
        assert_eq!(codes(&findings), vec!["arg-type"]);
        assert_eq!(findings[0].file, "pkg/main.py");
    }

    #[test]
    fn instance_method_return_propagates() {
        let findings = check(&[(
            "m.py",
            "class Box:\n    def get(self) -> int:\n        return 1\n\n\ndef use(b: Box) -> str:\n    return b.get()\n",
        )]);
        assert_eq!(codes(&findings), vec!["return-value"]);
    }

    #[test]
    fn syntax_error_reported() {
        let findings = check(&[("bad.py", "def broken(:\n")]);
        assert_eq!(codes(&findings), vec!["syntax"]);
    }

    #[test]
    fn optional_accepts_none_and_value() {
        let findings = check(&[(
            "m.py",
            "from typing import Optional\n\n\ndef f(x: Optional[int]) -> Optional[int]:\n    return x\n\n\ndef use():\n    f(None)\n    f(3)\n    return None\n",
        )]);
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn forward_ref_string_annotation_resolves() {
        let findings = check(&[(
            "m.py",
            "def make() -> \"Late\":\n    return Late()\n\n\nclass Late:\n    pass\n",
        )]);
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn bool_assignable_to_int() {
        let findings = check(&[("m.py", "def f(n: int) -> int:\n    return n\n\n\ndef use():\n    return f(True)\n")]);
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn contextvar_get_is_dynamic() {
        let findings = check(&[(
            "m.py",
            "from contextvars import ContextVar\n\nvar: ContextVar = ContextVar('v')\n\n\ndef f():\n    ctx = var.get()\n    return ctx.anything\n",
        )]);
        assert!(findings.is_empty(), "{findings:?}");
    }
}
