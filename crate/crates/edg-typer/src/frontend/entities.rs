use super::{
    CodeSpan, Entity, EntityId, EntityKind, FrontendError, LineIndex, SlotId, SlotRole,
    SourceRepo, TypeSlot,
};
use rustpython_parser::{ast, parse, Mode};
use std::collections::BTreeMap;

/// Immutable map of all repository entities, keyed by qualified name.
///
/// Files that fail to parse are skipped and recorded; extraction is
/// deterministic over the repo bytes.
#[derive(Debug, Clone, Default)]
pub struct EntityIndex {
    entities: BTreeMap<EntityId, Entity>,
    pub skipped_files: Vec<(String, String)>,
}

impl EntityIndex {
    pub fn get(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &Entity)> {
        self.entities.iter()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.keys()
    }

    /// All slots of all entities, in entity order.
    pub fn all_slots(&self) -> impl Iterator<Item = &TypeSlot> {
        self.entities.values().flat_map(|e| e.slots.iter())
    }

    /// Resolve a dotted reference to a unique entity: either an exact id
    /// or an unambiguous dotted suffix (e.g. `RequestContext.hooks`).
    pub fn resolve_ref(&self, reference: &str) -> Option<&Entity> {
        let id = EntityId(reference.to_string());
        if let Some(e) = self.entities.get(&id) {
            return Some(e);
        }
        let suffix = format!(".{reference}");
        let mut found = None;
        for (id, entity) in &self.entities {
            if id.0.ends_with(&suffix) {
                if found.is_some() {
                    return None; // ambiguous
                }
                found = Some(entity);
            }
        }
        found
    }

    fn insert(&mut self, entity: Entity) {
        self.entities.entry(entity.id.clone()).or_insert(entity);
    }
}

/// Extract module-level variables, functions, classes, class attributes,
/// and methods from every parseable file of the repo.
///
/// Local variables and nested functions do not become entities. Parse
/// failures are collected per file and are not fatal.
pub fn extract_entities(repo: &SourceRepo) -> EntityIndex {
    let mut index = EntityIndex::default();
    for file in &repo.files {
        let module = match parse_module(&file.text, &file.path) {
            Ok(m) => m,
            Err(e) => {
                index.skipped_files.push((file.path.clone(), e.to_string()));
                continue;
            }
        };
        let module_path = SourceRepo::module_path(&file.path);
        let lines = LineIndex::new(&file.text);
        for stmt in &module.body {
            extract_top_level(stmt, &module_path, file, &lines, &mut index);
        }
    }
    index
}

pub(crate) fn parse_module(
    text: &str,
    path: &str,
) -> Result<ast::ModModule, FrontendError> {
    match parse(text, Mode::Module, path) {
        Ok(ast::Mod::Module(m)) => Ok(m),
        Ok(_) => Err(FrontendError::Parse {
            path: path.to_string(),
            message: "not a module".to_string(),
        }),
        Err(e) => Err(FrontendError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        }),
    }
}

fn extract_top_level(
    stmt: &ast::Stmt,
    module_path: &str,
    file: &super::SourceFile,
    lines: &LineIndex,
    index: &mut EntityIndex,
) {
    match stmt {
        ast::Stmt::FunctionDef(f) => {
            index.insert(function_entity(
                f.range,
                &f.name,
                &f.args,
                f.returns.as_deref(),
                &f.decorator_list,
                module_path,
                None,
                file,
                lines,
            ));
        }
        ast::Stmt::AsyncFunctionDef(f) => {
            index.insert(function_entity(
                f.range,
                &f.name,
                &f.args,
                f.returns.as_deref(),
                &f.decorator_list,
                module_path,
                None,
                file,
                lines,
            ));
        }
        ast::Stmt::ClassDef(c) => {
            let class_id = EntityId(format!("{module_path}.{}", c.name));
            let header_end = class_header_end(&file.text, c.range.start().to_usize());
            index.insert(Entity {
                id: class_id.clone(),
                kind: EntityKind::Class,
                defining_span: span_of(&file.path, lines, c.range.start().to_usize(), c.range.end().to_usize()),
                definition_text: file.text[c.range.start().to_usize()..header_end].to_string(),
                slots: vec![],
                enclosing_class: None,
            });
            for body_stmt in &c.body {
                match body_stmt {
                    ast::Stmt::FunctionDef(m) => {
                        index.insert(function_entity(
                            m.range,
                            &m.name,
                            &m.args,
                            m.returns.as_deref(),
                            &m.decorator_list,
                            &class_id.0,
                            Some(class_id.clone()),
                            file,
                            lines,
                        ));
                    }
                    ast::Stmt::AsyncFunctionDef(m) => {
                        index.insert(function_entity(
                            m.range,
                            &m.name,
                            &m.args,
                            m.returns.as_deref(),
                            &m.decorator_list,
                            &class_id.0,
                            Some(class_id.clone()),
                            file,
                            lines,
                        ));
                    }
                    ast::Stmt::Assign(a) => {
                        for target in &a.targets {
                            if let ast::Expr::Name(n) = target {
                                index.insert(variable_entity(
                                    &n.id,
                                    None,
                                    a.range.start().to_usize(),
                                    a.range.end().to_usize(),
                                    &class_id.0,
                                    Some(class_id.clone()),
                                    file,
                                    lines,
                                ));
                            }
                        }
                    }
                    ast::Stmt::AnnAssign(a) => {
                        if let ast::Expr::Name(n) = a.target.as_ref() {
                            let ann = annotation_text(&file.text, a.annotation.as_ref());
                            index.insert(variable_entity(
                                &n.id,
                                Some(ann),
                                a.range.start().to_usize(),
                                a.range.end().to_usize(),
                                &class_id.0,
                                Some(class_id.clone()),
                                file,
                                lines,
                            ));
                        }
                    }
                    _ => {}
                }
            }
        }
        ast::Stmt::Assign(a) => {
            for target in &a.targets {
                if let ast::Expr::Name(n) = target {
                    index.insert(variable_entity(
                        &n.id,
                        None,
                        a.range.start().to_usize(),
                        a.range.end().to_usize(),
                        module_path,
                        None,
                        file,
                        lines,
                    ));
                }
            }
        }
        ast::Stmt::AnnAssign(a) => {
            if let ast::Expr::Name(n) = a.target.as_ref() {
                let ann = annotation_text(&file.text, a.annotation.as_ref());
                index.insert(variable_entity(
                    &n.id,
                    Some(ann),
                    a.range.start().to_usize(),
                    a.range.end().to_usize(),
                    module_path,
                    None,
                    file,
                    lines,
                ));
            }
        }
        _ => {}
    }
}

#[allow(clippy::too_many_arguments)]
fn function_entity(
    range: ast::text_size::TextRange,
    name: &str,
    args: &ast::Arguments,
    returns: Option<&ast::Expr>,
    decorators: &[ast::Expr],
    owner_path: &str,
    enclosing_class: Option<EntityId>,
    file: &super::SourceFile,
    lines: &LineIndex,
) -> Entity {
    use rustpython_parser::ast::Ranged;

    let id = EntityId(format!("{owner_path}.{name}"));
    let mut slots = Vec::new();
    let is_method = enclosing_class.is_some();

    for (i, param) in ordered_params(args).into_iter().enumerate() {
        // Methods get no slot for a leading `self`/`cls`.
        if i == 0 && is_method && (param.arg.as_str() == "self" || param.arg.as_str() == "cls") {
            continue;
        }
        let slot_id = SlotId {
            entity: id.clone(),
            role: SlotRole::Param(param.arg.to_string()),
        };
        slots.push(match &param.annotation {
            Some(ann) => TypeSlot::validated(slot_id, annotation_text(&file.text, ann)),
            None => TypeSlot::unannotated(slot_id),
        });
    }
    let ret_id = SlotId {
        entity: id.clone(),
        role: SlotRole::Return,
    };
    slots.push(match returns {
        Some(r) => TypeSlot::validated(ret_id, annotation_text(&file.text, r)),
        None => TypeSlot::unannotated(ret_id),
    });

    // Definition text includes any decorators.
    let start = decorators
        .iter()
        .map(|d| d.range().start().to_usize())
        .min()
        .map(|d| decorator_line_start(&file.text, d))
        .unwrap_or(range.start().to_usize())
        .min(range.start().to_usize());
    let end = range.end().to_usize();

    Entity {
        id,
        kind: EntityKind::Function,
        defining_span: span_of(&file.path, lines, start, end),
        definition_text: file.text[start..end].to_string(),
        slots,
        enclosing_class,
    }
}

/// All parameters in declaration order, including `*args` and `**kwargs`.
pub(crate) fn ordered_params(args: &ast::Arguments) -> Vec<&ast::Arg> {
    params_with_meta(args).into_iter().map(|(a, ..)| a).collect()
}

/// Parameters in declaration order as `(arg, has_default, kwonly, variadic)`.
pub fn params_with_meta(args: &ast::Arguments) -> Vec<(&ast::Arg, bool, bool, bool)> {
    let mut out = Vec::new();
    for a in &args.posonlyargs {
        out.push((&a.def, a.default.is_some(), false, false));
    }
    for a in &args.args {
        out.push((&a.def, a.default.is_some(), false, false));
    }
    if let Some(v) = &args.vararg {
        out.push((v.as_ref(), false, false, true));
    }
    for a in &args.kwonlyargs {
        out.push((&a.def, a.default.is_some(), true, false));
    }
    if let Some(k) = &args.kwarg {
        out.push((k.as_ref(), false, false, true));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn variable_entity(
    name: &str,
    annotation: Option<String>,
    start: usize,
    end: usize,
    owner_path: &str,
    enclosing_class: Option<EntityId>,
    file: &super::SourceFile,
    lines: &LineIndex,
) -> Entity {
    let id = EntityId(format!("{owner_path}.{name}"));
    let slot_id = SlotId {
        entity: id.clone(),
        role: SlotRole::Var,
    };
    let slot = match annotation {
        Some(ann) => TypeSlot::validated(slot_id, ann),
        None => TypeSlot::unannotated(slot_id),
    };
    Entity {
        id,
        kind: EntityKind::Variable,
        defining_span: span_of(&file.path, lines, start, end),
        definition_text: file.text[start..end].to_string(),
        slots: vec![slot],
        enclosing_class,
    }
}

pub(crate) fn annotation_text(source: &str, expr: &ast::Expr) -> String {
    use rustpython_parser::ast::Ranged;
    source[expr.range().start().to_usize()..expr.range().end().to_usize()]
        .trim()
        .to_string()
}

fn span_of(path: &str, lines: &LineIndex, start: usize, end: usize) -> CodeSpan {
    let (start_line, start_col) = lines.locate(start);
    let (end_line, end_col) = lines.locate(end);
    CodeSpan {
        file: path.to_string(),
        start_line,
        start_col,
        end_line,
        end_col,
    }
}

/// End offset of the `class ...:` header line (through the newline).
fn class_header_end(text: &str, start: usize) -> usize {
    text[start..]
        .find('\n')
        .map(|i| start + i)
        .unwrap_or(text.len())
}

fn decorator_line_start(text: &str, decorator_start: usize) -> usize {
    // Back up to include the `@` marker.
    text[..decorator_start]
        .rfind('@')
        .filter(|at| text[*at..decorator_start].trim() == "@" || *at + 1 == decorator_start)
        .unwrap_or(decorator_start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repo(files: &[(&str, &str)]) -> SourceRepo {
        SourceRepo::from_files(
            files
                .iter()
                .map(|(p, t)| (p.to_string(), t.to_string()))
                .collect(),
        )
    }

    #[test]
    fn module_var_has_one_slot() {
        let index = extract_entities(&repo(&[("m.py", "x = 1\n")]));
        let e = index.get(&EntityId("m.x".into())).unwrap();
        assert_eq!(e.kind, EntityKind::Variable);
        assert_eq!(e.slots.len(), 1);
        assert_eq!(e.slots[0].id.role, SlotRole::Var);
    }

    #[test]
    fn function_slot_arithmetic() {
        let index = extract_entities(&repo(&[("m.py", "def f(a, b):\n    return a\n")]));
        let e = index.get(&EntityId("m.f".into())).unwrap();
        assert_eq!(e.kind, EntityKind::Function);
        assert_eq!(e.slots.len(), 3);
        assert_eq!(e.slots[2].id.role, SlotRole::Return);
    }

    #[test]
    fn method_self_gets_no_slot() {
        let src = "class C:\n    attr = 1\n    def m(self, x):\n        return x\n";
        let index = extract_entities(&repo(&[("m.py", src)]));
        let m = index.get(&EntityId("m.C.m".into())).unwrap();
        assert_eq!(m.slots.len(), 2); // x + return
        assert_eq!(m.enclosing_class, Some(EntityId("m.C".into())));
        let attr = index.get(&EntityId("m.C.attr".into())).unwrap();
        assert_eq!(attr.kind, EntityKind::Variable);
        let class = index.get(&EntityId("m.C".into())).unwrap();
        assert!(class.slots.is_empty());
    }

    #[test]
    fn locals_and_nested_functions_excluded() {
        let src = "def outer():\n    inner_var = 1\n    def inner():\n        return 2\n    return inner\n";
        let index = extract_entities(&repo(&[("m.py", src)]));
        assert!(index.contains(&EntityId("m.outer".into())));
        assert!(!index.contains(&EntityId("m.outer.inner".into())));
        assert!(!index.contains(&EntityId("m.inner_var".into())));
        assert_eq!(index.len(), 1);
    }

    #[test]
    fn preexisting_annotations_enter_validated() {
        let src = "x: int = 1\ndef f(a: str) -> bool:\n    return True\n";
        let index = extract_entities(&repo(&[("m.py", src)]));
        let x = index.get(&EntityId("m.x".into())).unwrap();
        assert_eq!(x.slots[0].state, super::super::SlotState::Validated);
        assert_eq!(x.slots[0].annotation.as_deref(), Some("int"));
        let f = index.get(&EntityId("m.f".into())).unwrap();
        assert!(f.slots.iter().all(|s| s.is_annotated()));
    }

    #[test]
    fn syntax_error_files_are_skipped_and_recorded() {
        let index = extract_entities(&repo(&[("bad.py", "def broken(:\n"), ("ok.py", "y = 2\n")]));
        assert_eq!(index.skipped_files.len(), 1);
        assert_eq!(index.skipped_files[0].0, "bad.py");
        assert!(index.contains(&EntityId("ok.y".into())));
    }

    #[test]
    fn suffix_resolution() {
        let src = "class RequestContext:\n    _after_request_functions = []\n";
        let index = extract_entities(&repo(&[("app/ctx.py", src)]));
        let e = index
            .resolve_ref("RequestContext._after_request_functions")
            .unwrap();
        assert_eq!(e.id.as_str(), "app.ctx.RequestContext._after_request_functions");
    }
}
