use crate::frontend::{SourceRepo, SourceFile};
use crate::types::{normalize_type, NormalizedType};
use rustpython_parser::ast::{self, Ranged};
use std::collections::{BTreeMap, BTreeSet};

/// A parsed annotation; `None` when absent or unparseable (treated as
/// dynamic, never checked).
pub type Ann = Option<NormalizedType>;

#[derive(Debug, Clone)]
pub struct ParamSym {
    pub name: String,
    pub ann: Ann,
    pub has_default: bool,
    pub kwonly: bool,
}

#[derive(Debug, Clone)]
pub struct FuncSym {
    pub params: Vec<ParamSym>,
    pub vararg: bool,
    pub kwarg: bool,
    pub returns: Ann,
    /// Any parameter or the return is annotated: the function
    /// participates in checking. Unannotated functions stay dynamic.
    pub is_annotated: bool,
    pub def_line: u32,
    pub is_generator: bool,
}

#[derive(Debug, Clone)]
pub struct ClassSym {
    pub name: String,
    /// Base names as written (dotted allowed).
    pub bases: Vec<String>,
    pub methods: BTreeMap<String, FuncSym>,
    /// Class-body and `self.x` attributes with optional annotations.
    pub attrs: BTreeMap<String, Ann>,
    /// Defines `__getattr__`-style hooks; attribute checks are skipped.
    pub dynamic: bool,
}

#[derive(Debug, Clone)]
pub enum ImportTarget {
    Module(String),
    Item { module: String, name: String },
    /// Not resolvable inside the repo (stdlib or third party). Binds the
    /// name, types as unknown, and never reports import errors.
    External,
}

#[derive(Debug, Default)]
pub struct ModuleSym {
    pub name: String,
    pub classes: BTreeMap<String, ClassSym>,
    pub functions: BTreeMap<String, FuncSym>,
    pub vars: BTreeMap<String, Ann>,
    pub imports: BTreeMap<String, ImportTarget>,
    /// Every name the module binds at any top-level reachable position.
    pub declared: BTreeSet<String>,
}

#[derive(Debug, Default)]
pub struct Project {
    pub modules: BTreeMap<String, ModuleSym>,
    module_paths: BTreeSet<String>,
}

impl Project {
    pub fn build(repo: &SourceRepo) -> (Self, Vec<(String, u32, String)>) {
        let mut project = Project::default();
        let mut syntax_errors = Vec::new();
        for f in &repo.files {
            let m = SourceRepo::module_path(&f.path);
            project.module_paths.insert(m.clone());
            let mut parts: Vec<&str> = m.split('.').collect();
            while parts.len() > 1 {
                parts.pop();
                project.module_paths.insert(parts.join("."));
            }
        }
        for f in &repo.files {
            match rustpython_parser::parse(&f.text, rustpython_parser::Mode::Module, &f.path) {
                Ok(ast::Mod::Module(module)) => {
                    let sym = build_module(f, &module, &project.module_paths);
                    project.modules.insert(sym.name.clone(), sym);
                }
                Ok(_) => {}
                Err(e) => {
                    let lines = crate::frontend::LineIndex::new(&f.text);
                    let offset = e.offset.to_usize().min(f.text.len());
                    let (line, _) = lines.locate(offset);
                    syntax_errors.push((f.path.clone(), line, "invalid syntax".to_string()));
                }
            }
        }
        (project, syntax_errors)
    }

    pub fn module(&self, name: &str) -> Option<&ModuleSym> {
        self.modules.get(name)
    }

    pub fn has_module(&self, name: &str) -> bool {
        self.module_paths.contains(name)
    }

    /// Resolve a class visible in `module` under `name` (local or
    /// imported). Returns the owning module name and the class.
    pub fn resolve_class<'a>(&'a self, module: &'a str, name: &str) -> Option<(&'a str, &'a ClassSym)> {
        let m = self.modules.get(module)?;
        if let Some(c) = m.classes.get(name) {
            return Some((module, c));
        }
        match m.imports.get(name)? {
            ImportTarget::Item { module: src, name: orig } => {
                let sm = self.modules.get(src)?;
                sm.classes.get(orig).map(|c| (src.as_str(), c))
            }
            _ => None,
        }
    }

    pub fn resolve_var<'a>(&'a self, module: &str, name: &str) -> Option<&'a Ann> {
        let m = self.modules.get(module)?;
        if let Some(v) = m.vars.get(name) {
            return Some(v);
        }
        match m.imports.get(name)? {
            ImportTarget::Item { module: src, name: orig } => {
                self.modules.get(src)?.vars.get(orig)
            }
            _ => None,
        }
    }

    /// Method lookup through the (user-class) MRO, depth first.
    pub fn find_method<'a>(
        &'a self,
        module: &'a str,
        class: &'a ClassSym,
        method: &str,
    ) -> Option<(&'a str, &'a FuncSym)> {
        if let Some(f) = class.methods.get(method) {
            return Some((module, f));
        }
        for base in &class.bases {
            let base_name = base.rsplit('.').next().unwrap_or(base);
            if let Some((bm, bc)) = self.resolve_class(module, base_name) {
                if bc.name != class.name {
                    if let Some(found) = self.find_method(bm, bc, method) {
                        return Some(found);
                    }
                }
            }
        }
        None
    }

    /// Whether an instance of `class` has `attr` (through bases). `None`
    /// when a base is unresolvable (assume dynamic).
    pub fn class_has_attr(&self, module: &str, class: &ClassSym, attr: &str) -> Option<bool> {
        if class.dynamic {
            return None;
        }
        if class.attrs.contains_key(attr) || class.methods.contains_key(attr) {
            return Some(true);
        }
        for base in &class.bases {
            let base_name = base.rsplit('.').next().unwrap_or(base);
            match self.resolve_class(module, base_name) {
                Some((bm, bc)) if bc.name != class.name => {
                    match self.class_has_attr(bm, bc, attr) {
                        Some(true) => return Some(true),
                        Some(false) => {}
                        None => return None,
                    }
                }
                _ => return None, // unresolvable base: could define anything
            }
        }
        Some(false)
    }

    /// Annotation of an instance attribute, walking bases.
    pub fn class_attr_ann<'a>(
        &'a self,
        module: &'a str,
        class: &'a ClassSym,
        attr: &str,
    ) -> Option<&'a Ann> {
        if let Some(ann) = class.attrs.get(attr) {
            return Some(ann);
        }
        for base in &class.bases {
            let base_name = base.rsplit('.').next().unwrap_or(base);
            if let Some((bm, bc)) = self.resolve_class(module, base_name) {
                if bc.name != class.name {
                    if let Some(found) = self.class_attr_ann(bm, bc, attr) {
                        return Some(found);
                    }
                }
            }
        }
        None
    }

    /// True when `sub` (a user class in `module`) inherits from `sup`.
    pub fn is_subclass(&self, module: &str, sub: &str, sup: &str) -> bool {
        if sub == sup {
            return true;
        }
        let Some((m, c)) = self.resolve_class(module, sub) else {
            return false;
        };
        c.bases.iter().any(|b| {
            let base_name = b.rsplit('.').next().unwrap_or(b);
            base_name == sup || self.is_subclass(m, base_name, sup)
        })
    }
}

pub fn parse_ann(src: &str, expr: &ast::Expr) -> Ann {
    let text = &src[expr.range().start().to_usize()..expr.range().end().to_usize()];
    normalize_type(text).ok()
}

fn build_module(file: &SourceFile, module: &ast::ModModule, known: &BTreeSet<String>) -> ModuleSym {
    let name = SourceRepo::module_path(&file.path);
    let mut sym = ModuleSym {
        name: name.clone(),
        ..Default::default()
    };
    let lines = crate::frontend::LineIndex::new(&file.text);

    collect_declared(&module.body, &mut sym.declared);

    for stmt in &module.body {
        match stmt {
            ast::Stmt::Import(imp) => {
                for a in &imp.names {
                    let target_name = a.name.to_string();
                    let bound = a
                        .asname
                        .as_ref()
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| target_name.split('.').next().unwrap().to_string());
                    let target_module = if a.asname.is_some() {
                        target_name.clone()
                    } else {
                        target_name.split('.').next().unwrap().to_string()
                    };
                    let target = if known.contains(&target_module) {
                        ImportTarget::Module(target_module)
                    } else {
                        ImportTarget::External
                    };
                    sym.imports.insert(bound, target);
                }
            }
            ast::Stmt::ImportFrom(imp) => {
                let level = imp.level.map(|l| l.to_usize()).unwrap_or(0);
                let base = import_base(&name, &file.path, level, imp.module.as_deref());
                for a in &imp.names {
                    if a.name.as_str() == "*" {
                        continue;
                    }
                    let bound = a
                        .asname
                        .as_ref()
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| a.name.to_string());
                    let target = match &base {
                        Some(b) if known.contains(b) => {
                            let qualified = format!("{b}.{}", a.name);
                            if known.contains(&qualified) {
                                ImportTarget::Module(qualified)
                            } else {
                                ImportTarget::Item {
                                    module: b.clone(),
                                    name: a.name.to_string(),
                                }
                            }
                        }
                        _ => ImportTarget::External,
                    };
                    sym.imports.insert(bound, target);
                }
            }
            ast::Stmt::FunctionDef(f) => {
                sym.functions
                    .insert(f.name.to_string(), build_func(file, &lines, &f.args, f.returns.as_deref(), &f.body, f.range, false));
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                sym.functions
                    .insert(f.name.to_string(), build_func(file, &lines, &f.args, f.returns.as_deref(), &f.body, f.range, false));
            }
            ast::Stmt::ClassDef(c) => {
                sym.classes.insert(c.name.to_string(), build_class(file, &lines, c));
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    if let ast::Expr::Name(n) = t {
                        sym.vars.entry(n.id.to_string()).or_insert(None);
                    }
                }
            }
            ast::Stmt::AnnAssign(a) => {
                if let ast::Expr::Name(n) = a.target.as_ref() {
                    sym.vars
                        .insert(n.id.to_string(), parse_ann(&file.text, &a.annotation));
                }
            }
            _ => {}
        }
    }
    sym
}

fn import_base(
    module_path: &str,
    file_path: &str,
    level: usize,
    module: Option<&str>,
) -> Option<String> {
    if level == 0 {
        return module.map(|m| m.to_string());
    }
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

#[allow(clippy::too_many_arguments)]
fn build_func(
    file: &SourceFile,
    lines: &crate::frontend::LineIndex,
    args: &ast::Arguments,
    returns: Option<&ast::Expr>,
    body: &[ast::Stmt],
    range: ast::text_size::TextRange,
    is_method: bool,
) -> FuncSym {
    let mut params = Vec::new();
    let mut any_ann = false;
    let ordered = crate::frontend::params_with_meta(args);
    for (i, (arg, has_default, kwonly, variadic)) in ordered.iter().enumerate() {
        if is_method && i == 0 && (arg.arg.as_str() == "self" || arg.arg.as_str() == "cls") {
            continue;
        }
        let ann = arg.annotation.as_deref().and_then(|a| {
            any_ann = true;
            parse_ann(&file.text, a)
        });
        if *variadic {
            continue; // *args / **kwargs recorded as flags below
        }
        params.push(ParamSym {
            name: arg.arg.to_string(),
            ann,
            has_default: *has_default,
            kwonly: *kwonly,
        });
    }
    let returns_ann = returns.and_then(|r| {
        any_ann = true;
        parse_ann(&file.text, r)
    });
    FuncSym {
        params,
        vararg: args.vararg.is_some(),
        kwarg: args.kwarg.is_some(),
        returns: returns_ann,
        is_annotated: any_ann,
        def_line: lines.locate(range.start().to_usize()).0,
        is_generator: body_has_yield(body),
    }
}

fn build_class(file: &SourceFile, lines: &crate::frontend::LineIndex, c: &ast::StmtClassDef) -> ClassSym {
    let mut sym = ClassSym {
        name: c.name.to_string(),
        bases: c.bases.iter().filter_map(dotted_name).collect(),
        methods: BTreeMap::new(),
        attrs: BTreeMap::new(),
        dynamic: false,
    };
    for stmt in &c.body {
        match stmt {
            ast::Stmt::FunctionDef(f) => {
                if matches!(f.name.as_str(), "__getattr__" | "__getattribute__" | "__setattr__") {
                    sym.dynamic = true;
                }
                let func = build_func(file, lines, &f.args, f.returns.as_deref(), &f.body, f.range, true);
                collect_self_attrs(&f.body, &file.text, &mut sym.attrs);
                sym.methods.insert(f.name.to_string(), func);
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                let func = build_func(file, lines, &f.args, f.returns.as_deref(), &f.body, f.range, true);
                collect_self_attrs(&f.body, &file.text, &mut sym.attrs);
                sym.methods.insert(f.name.to_string(), func);
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    if let ast::Expr::Name(n) = t {
                        sym.attrs.entry(n.id.to_string()).or_insert(None);
                    }
                }
            }
            ast::Stmt::AnnAssign(a) => {
                if let ast::Expr::Name(n) = a.target.as_ref() {
                    sym.attrs
                        .insert(n.id.to_string(), parse_ann(&file.text, &a.annotation));
                }
            }
            _ => {}
        }
    }
    sym
}

/// Record `self.x = ...` attribute definitions from method bodies.
fn collect_self_attrs(body: &[ast::Stmt], src: &str, attrs: &mut BTreeMap<String, Ann>) {
    for stmt in body {
        match stmt {
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    if let ast::Expr::Attribute(at) = t {
                        if let ast::Expr::Name(n) = at.value.as_ref() {
                            if n.id.as_str() == "self" {
                                attrs.entry(at.attr.to_string()).or_insert(None);
                            }
                        }
                    }
                }
            }
            ast::Stmt::AnnAssign(a) => {
                if let ast::Expr::Attribute(at) = a.target.as_ref() {
                    if let ast::Expr::Name(n) = at.value.as_ref() {
                        if n.id.as_str() == "self" {
                            attrs.insert(at.attr.to_string(), parse_ann(src, &a.annotation));
                        }
                    }
                }
            }
            ast::Stmt::If(s) => {
                collect_self_attrs(&s.body, src, attrs);
                collect_self_attrs(&s.orelse, src, attrs);
            }
            ast::Stmt::For(s) => collect_self_attrs(&s.body, src, attrs),
            ast::Stmt::While(s) => collect_self_attrs(&s.body, src, attrs),
            ast::Stmt::With(s) => collect_self_attrs(&s.body, src, attrs),
            ast::Stmt::Try(s) => {
                collect_self_attrs(&s.body, src, attrs);
                for h in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    collect_self_attrs(&h.body, src, attrs);
                }
            }
            _ => {}
        }
    }
}

fn dotted_name(e: &ast::Expr) -> Option<String> {
    match e {
        ast::Expr::Name(n) => Some(n.id.to_string()),
        ast::Expr::Attribute(a) => {
            let base = dotted_name(&a.value)?;
            Some(format!("{base}.{}", a.attr))
        }
        _ => None,
    }
}

fn body_has_yield(body: &[ast::Stmt]) -> bool {
    fn expr_has_yield(e: &ast::Expr) -> bool {
        matches!(e, ast::Expr::Yield(_) | ast::Expr::YieldFrom(_))
    }
    fn walk(body: &[ast::Stmt]) -> bool {
        for stmt in body {
            let hit = match stmt {
                ast::Stmt::Expr(e) => expr_has_yield(&e.value),
                ast::Stmt::Assign(a) => expr_has_yield(&a.value),
                ast::Stmt::Return(_) => false,
                ast::Stmt::If(s) => walk(&s.body) || walk(&s.orelse),
                ast::Stmt::For(s) => walk(&s.body) || walk(&s.orelse),
                ast::Stmt::While(s) => walk(&s.body) || walk(&s.orelse),
                ast::Stmt::With(s) => walk(&s.body),
                ast::Stmt::Try(s) => {
                    walk(&s.body)
                        || s.handlers.iter().any(|h| {
                            let ast::ExceptHandler::ExceptHandler(h) = h;
                            walk(&h.body)
                        })
                        || walk(&s.orelse)
                        || walk(&s.finalbody)
                }
                _ => false,
            };
            if hit {
                return true;
            }
        }
        false
    }
    walk(body)
}

/// All names a module body binds, for name-defined checks. Lenient: any
/// store at any nesting level of the module body counts.
fn collect_declared(body: &[ast::Stmt], out: &mut BTreeSet<String>) {
    for stmt in body {
        match stmt {
            ast::Stmt::FunctionDef(f) => {
                out.insert(f.name.to_string());
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                out.insert(f.name.to_string());
            }
            ast::Stmt::ClassDef(c) => {
                out.insert(c.name.to_string());
            }
            ast::Stmt::Import(imp) => {
                for a in &imp.names {
                    out.insert(
                        a.asname
                            .as_ref()
                            .map(|s| s.to_string())
                            .unwrap_or_else(|| a.name.split('.').next().unwrap().to_string()),
                    );
                }
            }
            ast::Stmt::ImportFrom(imp) => {
                for a in &imp.names {
                    if a.name.as_str() != "*" {
                        out.insert(
                            a.asname
                                .as_ref()
                                .map(|s| s.to_string())
                                .unwrap_or_else(|| a.name.to_string()),
                        );
                    }
                }
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    store_names(t, out);
                }
            }
            ast::Stmt::AnnAssign(a) => store_names(&a.target, out),
            ast::Stmt::AugAssign(a) => store_names(&a.target, out),
            ast::Stmt::For(s) => {
                store_names(&s.target, out);
                collect_declared(&s.body, out);
                collect_declared(&s.orelse, out);
            }
            ast::Stmt::While(s) => {
                collect_declared(&s.body, out);
                collect_declared(&s.orelse, out);
            }
            ast::Stmt::If(s) => {
                collect_declared(&s.body, out);
                collect_declared(&s.orelse, out);
            }
            ast::Stmt::With(s) => {
                for item in &s.items {
                    if let Some(v) = &item.optional_vars {
                        store_names(v, out);
                    }
                }
                collect_declared(&s.body, out);
            }
            ast::Stmt::Try(s) => {
                collect_declared(&s.body, out);
                for h in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    if let Some(n) = &h.name {
                        out.insert(n.to_string());
                    }
                    collect_declared(&h.body, out);
                }
                collect_declared(&s.orelse, out);
                collect_declared(&s.finalbody, out);
            }
            _ => {}
        }
    }
}

pub(crate) fn store_names(target: &ast::Expr, out: &mut BTreeSet<String>) {
    match target {
        ast::Expr::Name(n) => {
            out.insert(n.id.to_string());
        }
        ast::Expr::Tuple(t) => t.elts.iter().for_each(|e| store_names(e, out)),
        ast::Expr::List(l) => l.elts.iter().for_each(|e| store_names(e, out)),
        ast::Expr::Starred(s) => store_names(&s.value, out),
        _ => {}
    }
}
