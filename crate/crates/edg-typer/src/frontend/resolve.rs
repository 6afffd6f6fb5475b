use super::entities::{ordered_params, parse_module, EntityIndex};
use super::{CodeSpan, EntityId, EntityKind, LineIndex, SourceFile, SourceRepo};
use rustpython_parser::ast::{self, Ranged};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// How a statement refers to an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefKind {
    Call,
    Read,
    Write,
    Inherit,
}

/// Entities referenced by one statement inside an entity's definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatementRef {
    /// The entity whose definition contains the statement.
    pub owner: EntityId,
    pub statement_span: CodeSpan,
    pub referenced: Vec<(EntityId, RefKind)>,
}

#[derive(Debug, Clone)]
enum Binding {
    Entity(EntityId),
    Module(String),
}

/// Per-module name bindings derived from imports and top-level definitions.
#[derive(Debug, Default)]
pub struct ModuleScopes {
    scopes: BTreeMap<String, BTreeMap<String, Binding>>,
    modules: BTreeSet<String>,
}

impl ModuleScopes {
    pub fn build(repo: &SourceRepo, index: &EntityIndex) -> Self {
        let mut modules = BTreeSet::new();
        for f in &repo.files {
            let m = SourceRepo::module_path(&f.path);
            modules.insert(m.clone());
            // Every ancestor directory acts as a package path.
            let mut parts: Vec<&str> = m.split('.').collect();
            while parts.len() > 1 {
                parts.pop();
                modules.insert(parts.join("."));
            }
        }

        let mut scopes = BTreeMap::new();
        for f in &repo.files {
            let module_path = SourceRepo::module_path(&f.path);
            let Ok(module) = parse_module(&f.text, &f.path) else {
                continue;
            };
            let mut bindings: BTreeMap<String, Binding> = BTreeMap::new();
            for stmt in &module.body {
                match stmt {
                    ast::Stmt::Import(imp) => {
                        for alias in &imp.names {
                            match &alias.asname {
                                Some(asname) => {
                                    bindings.insert(
                                        asname.to_string(),
                                        Binding::Module(alias.name.to_string()),
                                    );
                                }
                                None => {
                                    let root = alias.name.split('.').next().unwrap().to_string();
                                    bindings.insert(root.clone(), Binding::Module(root));
                                }
                            }
                        }
                    }
                    ast::Stmt::ImportFrom(imp) => {
                        let level = imp.level.map(|l| l.to_usize()).unwrap_or(0);
                        let Some(base) =
                            resolve_import_base(&module_path, &f.path, level, imp.module.as_deref())
                        else {
                            continue;
                        };
                        for alias in &imp.names {
                            if alias.name.as_str() == "*" {
                                continue;
                            }
                            let bound = alias
                                .asname
                                .as_ref()
                                .map(|a| a.to_string())
                                .unwrap_or_else(|| alias.name.to_string());
                            let qualified = format!("{base}.{}", alias.name);
                            let entity_id = EntityId(qualified.clone());
                            if index.contains(&entity_id) {
                                bindings.insert(bound, Binding::Entity(entity_id));
                            } else if modules.contains(&qualified) {
                                bindings.insert(bound, Binding::Module(qualified));
                            }
                        }
                    }
                    ast::Stmt::FunctionDef(d) => {
                        bind_own(&mut bindings, &module_path, d.name.as_str(), index);
                    }
                    ast::Stmt::AsyncFunctionDef(d) => {
                        bind_own(&mut bindings, &module_path, d.name.as_str(), index);
                    }
                    ast::Stmt::ClassDef(d) => {
                        bind_own(&mut bindings, &module_path, d.name.as_str(), index);
                    }
                    ast::Stmt::Assign(a) => {
                        for t in &a.targets {
                            if let ast::Expr::Name(n) = t {
                                bind_own(&mut bindings, &module_path, n.id.as_str(), index);
                            }
                        }
                    }
                    ast::Stmt::AnnAssign(a) => {
                        if let ast::Expr::Name(n) = a.target.as_ref() {
                            bind_own(&mut bindings, &module_path, n.id.as_str(), index);
                        }
                    }
                    _ => {}
                }
            }
            scopes.insert(module_path, bindings);
        }
        ModuleScopes { scopes, modules }
    }

    fn lookup(&self, module: &str, name: &str) -> Option<&Binding> {
        self.scopes.get(module)?.get(name)
    }
}

fn bind_own(
    bindings: &mut BTreeMap<String, Binding>,
    module_path: &str,
    name: &str,
    index: &EntityIndex,
) {
    let id = EntityId(format!("{module_path}.{name}"));
    if index.contains(&id) {
        bindings.insert(name.to_string(), Binding::Entity(id));
    }
}

/// Absolute module path that a `from ... import` resolves against.
fn resolve_import_base(
    module_path: &str,
    file_path: &str,
    level: usize,
    module: Option<&str>,
) -> Option<String> {
    if level == 0 {
        return module.map(|m| m.to_string());
    }
    // Relative import: level 1 is the containing package.
    let is_init = file_path.ends_with("__init__.py");
    let mut parts: Vec<&str> = module_path.split('.').collect();
    let drop = if is_init { level - 1 } else { level };
    if drop > parts.len() {
        return None;
    }
    parts.truncate(parts.len() - drop);
    let base = parts.join(".");
    match module {
        Some(m) if base.is_empty() => Some(m.to_string()),
        Some(m) => Some(format!("{base}.{m}")),
        None if base.is_empty() => None,
        None => Some(base),
    }
}

/// Resolve, per statement of each entity's definition, the set of entities
/// it references. Best effort: dynamic accesses that cannot be resolved
/// lexically yield no reference.
pub fn resolve_statement_refs(repo: &SourceRepo, index: &EntityIndex) -> Vec<StatementRef> {
    let scopes = ModuleScopes::build(repo, index);
    let mut out = Vec::new();
    for file in &repo.files {
        let Ok(module) = parse_module(&file.text, &file.path) else {
            continue;
        };
        let module_path = SourceRepo::module_path(&file.path);
        let lines = LineIndex::new(&file.text);
        for stmt in &module.body {
            match stmt {
                ast::Stmt::FunctionDef(f) => {
                    let owner = EntityId(format!("{module_path}.{}", f.name));
                    collect_function(
                        &owner, None, &f.args, &f.body, &scopes, index, &module_path, file, &lines,
                        &mut out,
                    );
                }
                ast::Stmt::AsyncFunctionDef(f) => {
                    let owner = EntityId(format!("{module_path}.{}", f.name));
                    collect_function(
                        &owner, None, &f.args, &f.body, &scopes, index, &module_path, file, &lines,
                        &mut out,
                    );
                }
                ast::Stmt::ClassDef(c) => {
                    let class_id = EntityId(format!("{module_path}.{}", c.name));
                    // Inheritance references from the class header.
                    let mut refs = Vec::new();
                    for base in &c.bases {
                        let ctx = ResolveCtx {
                            scopes: &scopes,
                            index,
                            module: &module_path,
                            locals: &BTreeSet::new(),
                            globals_declared: &BTreeSet::new(),
                            self_class: None,
                        };
                        if let Some(id) = ctx.resolve_value(base) {
                            if index.get(&id).map(|e| e.kind) == Some(EntityKind::Class) {
                                refs.push((id, RefKind::Inherit));
                            }
                        }
                    }
                    if !refs.is_empty() {
                        out.push(StatementRef {
                            owner: class_id.clone(),
                            statement_span: span_of(&file.path, &lines, c.range),
                            referenced: refs,
                        });
                    }
                    for body_stmt in &c.body {
                        match body_stmt {
                            ast::Stmt::FunctionDef(m) => {
                                let owner = EntityId(format!("{}.{}", class_id, m.name));
                                collect_function(
                                    &owner,
                                    Some(&class_id),
                                    &m.args,
                                    &m.body,
                                    &scopes,
                                    index,
                                    &module_path,
                                    file,
                                    &lines,
                                    &mut out,
                                );
                            }
                            ast::Stmt::AsyncFunctionDef(m) => {
                                let owner = EntityId(format!("{}.{}", class_id, m.name));
                                collect_function(
                                    &owner,
                                    Some(&class_id),
                                    &m.args,
                                    &m.body,
                                    &scopes,
                                    index,
                                    &module_path,
                                    file,
                                    &lines,
                                    &mut out,
                                );
                            }
                            ast::Stmt::Assign(a) => {
                                for t in &a.targets {
                                    if let ast::Expr::Name(n) = t {
                                        let owner = EntityId(format!("{}.{}", class_id, n.id));
                                        collect_variable(
                                            &owner, &a.value, &scopes, index, &module_path, file,
                                            &lines, a.range, &mut out,
                                        );
                                    }
                                }
                            }
                            ast::Stmt::AnnAssign(a) => {
                                if let (ast::Expr::Name(n), Some(value)) =
                                    (a.target.as_ref(), a.value.as_deref())
                                {
                                    let owner = EntityId(format!("{}.{}", class_id, n.id));
                                    collect_variable(
                                        &owner, value, &scopes, index, &module_path, file, &lines,
                                        a.range, &mut out,
                                    );
                                }
                            }
                            _ => {}
                        }
                    }
                }
                ast::Stmt::Assign(a) => {
                    for t in &a.targets {
                        if let ast::Expr::Name(n) = t {
                            let owner = EntityId(format!("{module_path}.{}", n.id));
                            collect_variable(
                                &owner, &a.value, &scopes, index, &module_path, file, &lines,
                                a.range, &mut out,
                            );
                        }
                    }
                }
                ast::Stmt::AnnAssign(a) => {
                    if let (ast::Expr::Name(n), Some(value)) = (a.target.as_ref(), a.value.as_deref())
                    {
                        let owner = EntityId(format!("{module_path}.{}", n.id));
                        collect_variable(
                            &owner, value, &scopes, index, &module_path, file, &lines, a.range,
                            &mut out,
                        );
                    }
                }
                _ => {}
            }
        }
    }
    out
}

struct ResolveCtx<'a> {
    scopes: &'a ModuleScopes,
    index: &'a EntityIndex,
    module: &'a str,
    locals: &'a BTreeSet<String>,
    globals_declared: &'a BTreeSet<String>,
    self_class: Option<&'a EntityId>,
}

impl<'a> ResolveCtx<'a> {
    fn resolve_name(&self, name: &str) -> Option<EntityId> {
        if self.locals.contains(name) && !self.globals_declared.contains(name) {
            return None;
        }
        match self.scopes.lookup(self.module, name)? {
            Binding::Entity(id) => Some(id.clone()),
            Binding::Module(_) => None,
        }
    }

    /// Resolve a Name or dotted Attribute chain to an entity.
    fn resolve_value(&self, expr: &ast::Expr) -> Option<EntityId> {
        match expr {
            ast::Expr::Name(n) => self.resolve_name(n.id.as_str()),
            ast::Expr::Attribute(_) => {
                let chain = attribute_chain(expr)?;
                self.resolve_chain(&chain)
            }
            _ => None,
        }
    }

    fn resolve_chain(&self, chain: &[&str]) -> Option<EntityId> {
        let root = chain[0];
        // `self.attr` / `cls.attr` within a method body.
        if let Some(class_id) = self.self_class {
            if (root == "self" || root == "cls") && chain.len() == 2 {
                let id = EntityId(format!("{}.{}", class_id, chain[1]));
                return self.index.contains(&id).then_some(id);
            }
        }
        if self.locals.contains(root) && !self.globals_declared.contains(root) {
            return None;
        }
        match self.scopes.lookup(self.module, root)? {
            Binding::Entity(id) => {
                // One attribute step into a class: `Cls.attr` or `Cls.method`.
                if chain.len() == 2 {
                    let id = EntityId(format!("{}.{}", id, chain[1]));
                    return self.index.contains(&id).then_some(id);
                }
                None
            }
            Binding::Module(m) => {
                let mut cur = m.clone();
                let mut i = 1;
                while i < chain.len() {
                    let next = format!("{cur}.{}", chain[i]);
                    if self.scopes.modules.contains(&next) {
                        cur = next;
                        i += 1;
                        continue;
                    }
                    let id = EntityId(next.clone());
                    if self.index.contains(&id) {
                        if i == chain.len() - 1 {
                            return Some(id);
                        }
                        // One more step into a class member.
                        if i == chain.len() - 2 {
                            let deeper = EntityId(format!("{next}.{}", chain[i + 1]));
                            return self.index.contains(&deeper).then_some(deeper);
                        }
                        return None;
                    }
                    return None;
                }
                None
            }
        }
    }
}

/// Dotted chain of a pure attribute expression: `a.b.c` → ["a","b","c"].
fn attribute_chain(expr: &ast::Expr) -> Option<Vec<&str>> {
    match expr {
        ast::Expr::Name(n) => Some(vec![n.id.as_str()]),
        ast::Expr::Attribute(a) => {
            let mut chain = attribute_chain(&a.value)?;
            chain.push(a.attr.as_str());
            Some(chain)
        }
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn collect_variable(
    owner: &EntityId,
    value: &ast::Expr,
    scopes: &ModuleScopes,
    index: &EntityIndex,
    module: &str,
    file: &SourceFile,
    lines: &LineIndex,
    range: ast::text_size::TextRange,
    out: &mut Vec<StatementRef>,
) {
    if !index.contains(owner) {
        return;
    }
    let empty = BTreeSet::new();
    let ctx = ResolveCtx {
        scopes,
        index,
        module,
        locals: &empty,
        globals_declared: &empty,
        self_class: None,
    };
    let mut refs = Vec::new();
    collect_expr(&ctx, value, false, &mut refs);
    dedup_refs(&mut refs);
    let refs: Vec<_> = refs.into_iter().filter(|(id, _)| id != owner).collect();
    if !refs.is_empty() {
        out.push(StatementRef {
            owner: owner.clone(),
            statement_span: span_of(&file.path, lines, range),
            referenced: refs,
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn collect_function(
    owner: &EntityId,
    enclosing_class: Option<&EntityId>,
    args: &ast::Arguments,
    body: &[ast::Stmt],
    scopes: &ModuleScopes,
    index: &EntityIndex,
    module: &str,
    file: &SourceFile,
    lines: &LineIndex,
    out: &mut Vec<StatementRef>,
) {
    if !index.contains(owner) {
        return;
    }
    // Function-scope locals: parameters plus every name stored anywhere in
    // the body (including nested defs), minus names declared global.
    let mut locals: BTreeSet<String> = ordered_params(args)
        .iter()
        .map(|p| p.arg.to_string())
        .collect();
    let mut globals_declared = BTreeSet::new();
    collect_locals(body, &mut locals, &mut globals_declared);

    let ctx = ResolveCtx {
        scopes,
        index,
        module,
        locals: &locals,
        globals_declared: &globals_declared,
        self_class: enclosing_class,
    };
    collect_stmts(&ctx, owner, body, file, lines, out);
}

fn collect_locals(body: &[ast::Stmt], locals: &mut BTreeSet<String>, globals: &mut BTreeSet<String>) {
    for stmt in body {
        match stmt {
            ast::Stmt::Global(g) => {
                for n in &g.names {
                    globals.insert(n.to_string());
                }
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    collect_store_names(t, locals);
                }
                collect_locals_expr(&a.value, locals);
            }
            ast::Stmt::AnnAssign(a) => {
                collect_store_names(&a.target, locals);
            }
            ast::Stmt::AugAssign(a) => {
                collect_store_names(&a.target, locals);
            }
            ast::Stmt::For(f) => {
                collect_store_names(&f.target, locals);
                collect_locals(&f.body, locals, globals);
                collect_locals(&f.orelse, locals, globals);
            }
            ast::Stmt::AsyncFor(f) => {
                collect_store_names(&f.target, locals);
                collect_locals(&f.body, locals, globals);
                collect_locals(&f.orelse, locals, globals);
            }
            ast::Stmt::With(w) => {
                for item in &w.items {
                    if let Some(v) = &item.optional_vars {
                        collect_store_names(v, locals);
                    }
                }
                collect_locals(&w.body, locals, globals);
            }
            ast::Stmt::AsyncWith(w) => {
                for item in &w.items {
                    if let Some(v) = &item.optional_vars {
                        collect_store_names(v, locals);
                    }
                }
                collect_locals(&w.body, locals, globals);
            }
            ast::Stmt::If(i) => {
                collect_locals(&i.body, locals, globals);
                collect_locals(&i.orelse, locals, globals);
            }
            ast::Stmt::While(w) => {
                collect_locals(&w.body, locals, globals);
                collect_locals(&w.orelse, locals, globals);
            }
            ast::Stmt::Try(t) => {
                collect_locals(&t.body, locals, globals);
                for h in &t.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    if let Some(n) = &h.name {
                        locals.insert(n.to_string());
                    }
                    collect_locals(&h.body, locals, globals);
                }
                collect_locals(&t.orelse, locals, globals);
                collect_locals(&t.finalbody, locals, globals);
            }
            ast::Stmt::FunctionDef(f) => {
                locals.insert(f.name.to_string());
                for p in ordered_params(&f.args) {
                    locals.insert(p.arg.to_string());
                }
                collect_locals(&f.body, locals, globals);
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                locals.insert(f.name.to_string());
                for p in ordered_params(&f.args) {
                    locals.insert(p.arg.to_string());
                }
                collect_locals(&f.body, locals, globals);
            }
            _ => {}
        }
    }
}

fn collect_locals_expr(expr: &ast::Expr, locals: &mut BTreeSet<String>) {
    // Comprehension and walrus targets count as locals.
    match expr {
        ast::Expr::NamedExpr(n) => {
            collect_store_names(&n.target, locals);
            collect_locals_expr(&n.value, locals);
        }
        ast::Expr::ListComp(c) => {
            for g in &c.generators {
                collect_store_names(&g.target, locals);
            }
        }
        ast::Expr::SetComp(c) => {
            for g in &c.generators {
                collect_store_names(&g.target, locals);
            }
        }
        ast::Expr::DictComp(c) => {
            for g in &c.generators {
                collect_store_names(&g.target, locals);
            }
        }
        ast::Expr::GeneratorExp(c) => {
            for g in &c.generators {
                collect_store_names(&g.target, locals);
            }
        }
        _ => {}
    }
}

fn collect_store_names(target: &ast::Expr, locals: &mut BTreeSet<String>) {
    match target {
        ast::Expr::Name(n) => {
            locals.insert(n.id.to_string());
        }
        ast::Expr::Tuple(t) => {
            for e in &t.elts {
                collect_store_names(e, locals);
            }
        }
        ast::Expr::List(l) => {
            for e in &l.elts {
                collect_store_names(e, locals);
            }
        }
        ast::Expr::Starred(s) => collect_store_names(&s.value, locals),
        _ => {}
    }
}

fn collect_stmts(
    ctx: &ResolveCtx<'_>,
    owner: &EntityId,
    body: &[ast::Stmt],
    file: &SourceFile,
    lines: &LineIndex,
    out: &mut Vec<StatementRef>,
) {
    for stmt in body {
        let mut refs = Vec::new();
        let mut nested: Vec<&[ast::Stmt]> = Vec::new();
        match stmt {
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    collect_store_refs(ctx, t, &mut refs);
                }
                collect_expr(ctx, &a.value, false, &mut refs);
            }
            ast::Stmt::AnnAssign(a) => {
                collect_store_refs(ctx, &a.target, &mut refs);
                if let Some(v) = &a.value {
                    collect_expr(ctx, v, false, &mut refs);
                }
            }
            ast::Stmt::AugAssign(a) => {
                collect_store_refs(ctx, &a.target, &mut refs);
                collect_expr(ctx, &a.target, false, &mut refs);
                collect_expr(ctx, &a.value, false, &mut refs);
            }
            ast::Stmt::Expr(e) => collect_expr(ctx, &e.value, false, &mut refs),
            ast::Stmt::Return(r) => {
                if let Some(v) = &r.value {
                    collect_expr(ctx, v, false, &mut refs);
                }
            }
            ast::Stmt::If(i) => {
                collect_expr(ctx, &i.test, false, &mut refs);
                nested.push(&i.body);
                nested.push(&i.orelse);
            }
            ast::Stmt::While(w) => {
                collect_expr(ctx, &w.test, false, &mut refs);
                nested.push(&w.body);
                nested.push(&w.orelse);
            }
            ast::Stmt::For(f) => {
                collect_expr(ctx, &f.iter, false, &mut refs);
                nested.push(&f.body);
                nested.push(&f.orelse);
            }
            ast::Stmt::AsyncFor(f) => {
                collect_expr(ctx, &f.iter, false, &mut refs);
                nested.push(&f.body);
                nested.push(&f.orelse);
            }
            ast::Stmt::With(w) => {
                for item in &w.items {
                    collect_expr(ctx, &item.context_expr, false, &mut refs);
                }
                nested.push(&w.body);
            }
            ast::Stmt::AsyncWith(w) => {
                for item in &w.items {
                    collect_expr(ctx, &item.context_expr, false, &mut refs);
                }
                nested.push(&w.body);
            }
            ast::Stmt::Try(t) => {
                nested.push(&t.body);
                for h in &t.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    nested.push(&h.body);
                }
                nested.push(&t.orelse);
                nested.push(&t.finalbody);
            }
            ast::Stmt::Raise(r) => {
                if let Some(e) = &r.exc {
                    collect_expr(ctx, e, false, &mut refs);
                }
            }
            ast::Stmt::Assert(a) => {
                collect_expr(ctx, &a.test, false, &mut refs);
            }
            ast::Stmt::FunctionDef(f) => nested.push(&f.body),
            ast::Stmt::AsyncFunctionDef(f) => nested.push(&f.body),
            _ => {}
        }
        dedup_refs(&mut refs);
        let refs: Vec<_> = refs.into_iter().filter(|(id, _)| id != owner).collect();
        if !refs.is_empty() {
            out.push(StatementRef {
                owner: owner.clone(),
                statement_span: span_of(&file.path, lines, stmt.range()),
                referenced: refs,
            });
        }
        for block in nested {
            collect_stmts(ctx, owner, block, file, lines, out);
        }
    }
}

fn collect_store_refs(ctx: &ResolveCtx<'_>, target: &ast::Expr, refs: &mut Vec<(EntityId, RefKind)>) {
    match target {
        ast::Expr::Name(n) => {
            if ctx.globals_declared.contains(n.id.as_str()) {
                if let Some(Binding::Entity(id)) = ctx.scopes.lookup(ctx.module, n.id.as_str()) {
                    refs.push((id.clone(), RefKind::Write));
                }
            }
        }
        ast::Expr::Attribute(_) => {
            if let Some(id) = ctx.resolve_value(target) {
                refs.push((id, RefKind::Write));
            }
        }
        ast::Expr::Tuple(t) => {
            for e in &t.elts {
                collect_store_refs(ctx, e, refs);
            }
        }
        ast::Expr::Subscript(s) => {
            collect_expr(ctx, &s.value, false, refs);
        }
        _ => {}
    }
}

/// Walk an expression, resolving entity references. `in_call` marks the
/// callee position of a call.
fn collect_expr(
    ctx: &ResolveCtx<'_>,
    expr: &ast::Expr,
    in_call: bool,
    refs: &mut Vec<(EntityId, RefKind)>,
) {
    match expr {
        ast::Expr::Name(_) | ast::Expr::Attribute(_) => {
            if let Some(id) = ctx.resolve_value(expr) {
                let kind = if in_call {
                    match ctx.index.get(&id).map(|e| e.kind) {
                        Some(EntityKind::Function) => RefKind::Call,
                        _ => RefKind::Read,
                    }
                } else {
                    RefKind::Read
                };
                refs.push((id, kind));
            } else if let ast::Expr::Attribute(a) = expr {
                // The chain didn't resolve, but its base might.
                collect_expr(ctx, &a.value, false, refs);
            }
        }
        ast::Expr::Call(c) => {
            collect_expr(ctx, &c.func, true, refs);
            for a in &c.args {
                collect_expr(ctx, a, false, refs);
            }
            for k in &c.keywords {
                collect_expr(ctx, &k.value, false, refs);
            }
        }
        ast::Expr::BinOp(b) => {
            collect_expr(ctx, &b.left, false, refs);
            collect_expr(ctx, &b.right, false, refs);
        }
        ast::Expr::BoolOp(b) => {
            for v in &b.values {
                collect_expr(ctx, v, false, refs);
            }
        }
        ast::Expr::UnaryOp(u) => collect_expr(ctx, &u.operand, false, refs),
        ast::Expr::Compare(c) => {
            collect_expr(ctx, &c.left, false, refs);
            for v in &c.comparators {
                collect_expr(ctx, v, false, refs);
            }
        }
        ast::Expr::IfExp(i) => {
            collect_expr(ctx, &i.test, false, refs);
            collect_expr(ctx, &i.body, false, refs);
            collect_expr(ctx, &i.orelse, false, refs);
        }
        ast::Expr::Tuple(t) => {
            for e in &t.elts {
                collect_expr(ctx, e, false, refs);
            }
        }
        ast::Expr::List(l) => {
            for e in &l.elts {
                collect_expr(ctx, e, false, refs);
            }
        }
        ast::Expr::Set(s) => {
            for e in &s.elts {
                collect_expr(ctx, e, false, refs);
            }
        }
        ast::Expr::Dict(d) => {
            for k in d.keys.iter().flatten() {
                collect_expr(ctx, k, false, refs);
            }
            for v in &d.values {
                collect_expr(ctx, v, false, refs);
            }
        }
        ast::Expr::Subscript(s) => {
            collect_expr(ctx, &s.value, false, refs);
            collect_expr(ctx, &s.slice, false, refs);
        }
        ast::Expr::Starred(s) => collect_expr(ctx, &s.value, false, refs),
        ast::Expr::Await(a) => collect_expr(ctx, &a.value, false, refs),
        ast::Expr::Yield(y) => {
            if let Some(v) = &y.value {
                collect_expr(ctx, v, false, refs);
            }
        }
        ast::Expr::YieldFrom(y) => collect_expr(ctx, &y.value, false, refs),
        ast::Expr::NamedExpr(n) => collect_expr(ctx, &n.value, false, refs),
        ast::Expr::JoinedStr(f) => {
            for v in &f.values {
                collect_expr(ctx, v, false, refs);
            }
        }
        ast::Expr::FormattedValue(f) => collect_expr(ctx, &f.value, false, refs),
        ast::Expr::Lambda(l) => collect_expr(ctx, &l.body, false, refs),
        _ => {}
    }
}

fn dedup_refs(refs: &mut Vec<(EntityId, RefKind)>) {
    refs.sort_by(|a, b| (&a.0, ref_rank(a.1)).cmp(&(&b.0, ref_rank(b.1))));
    refs.dedup();
}

fn ref_rank(k: RefKind) -> u8 {
    match k {
        RefKind::Call => 0,
        RefKind::Read => 1,
        RefKind::Write => 2,
        RefKind::Inherit => 3,
    }
}

fn span_of(path: &str, lines: &LineIndex, range: ast::text_size::TextRange) -> CodeSpan {
    let (start_line, start_col) = lines.locate(range.start().to_usize());
    let (end_line, end_col) = lines.locate(range.end().to_usize());
    CodeSpan {
        file: path.to_string(),
        start_line,
        start_col,
        end_line,
        end_col,
    }
}
