use super::entities::{extract_entities, ordered_params, parse_module};
use super::{
    EntityId, EntityKind, FrontendError, LineIndex, SlotId, SlotRole, SourceFile, SourceRepo,
};
use rustpython_parser::ast::{self, Ranged};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Marker line opening the deterministic import block that
/// [`apply_annotations`] emits and [`strip_annotations`] removes.
pub const IMPORT_BLOCK_MARKER: &str = "# edg-typer imports";

/// Annotations removed by [`strip_annotations`], keyed by slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotationArchive {
    pub entries: Vec<ArchiveEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub slot: String,
    #[serde(rename = "type")]
    pub type_expr: String,
}

impl AnnotationArchive {
    pub fn get(&self, slot: &SlotId) -> Option<&str> {
        let key = slot.text();
        self.entries
            .iter()
            .find(|e| e.slot == key)
            .map(|e| e.type_expr.as_str())
    }

    pub fn to_bindings(&self) -> BTreeMap<SlotId, String> {
        self.entries
            .iter()
            .filter_map(|e| SlotId::parse(&e.slot).map(|id| (id, e.type_expr.clone())))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Edit {
    start: usize,
    end: usize,
    replacement: String,
}

fn apply_edits(text: &str, mut edits: Vec<Edit>) -> String {
    edits.sort_by_key(|e| std::cmp::Reverse(e.start));
    let mut out = text.to_string();
    for e in edits {
        out.replace_range(e.start..e.end, &e.replacement);
    }
    out
}

/// Remove every parameter, return, and variable annotation plus
/// type-marker docstring lines and any previously emitted import block.
///
/// Removed annotations on repository-visible slots are archived keyed by
/// slot id. The operation is idempotent and the output parses.
pub fn strip_annotations(
    repo: &SourceRepo,
) -> Result<(SourceRepo, AnnotationArchive), FrontendError> {
    let mut archive = AnnotationArchive::default();
    let mut files = Vec::with_capacity(repo.files.len());
    for file in &repo.files {
        let module = parse_module(&file.text, &file.path)?;
        let module_path = SourceRepo::module_path(&file.path);
        let mut edits = Vec::new();
        strip_block(
            &module.body,
            &file.text,
            Scope::Module(&module_path),
            &mut edits,
            &mut archive,
        );
        strip_docstring_lines(&module.body, &file.text, &mut edits);
        strip_import_block(&file.text, &mut edits);
        let stripped = apply_edits(&file.text, edits);
        parse_module(&stripped, &file.path)?;
        files.push(SourceFile {
            path: file.path.clone(),
            text: stripped,
        });
    }
    Ok((
        SourceRepo {
            root: repo.root.clone(),
            files,
        },
        archive,
    ))
}

/// Archive visibility of the scope whose statements are being stripped.
#[derive(Clone, Copy)]
enum Scope<'a> {
    Module(&'a str),
    Class(&'a str),
    Nested,
}

impl<'a> Scope<'a> {
    fn prefix(&self) -> Option<&'a str> {
        match self {
            Scope::Module(p) | Scope::Class(p) => Some(p),
            Scope::Nested => None,
        }
    }
}

fn strip_block(
    body: &[ast::Stmt],
    src: &str,
    scope: Scope<'_>,
    edits: &mut Vec<Edit>,
    archive: &mut AnnotationArchive,
) {
    for stmt in body {
        match stmt {
            ast::Stmt::FunctionDef(f) => {
                let fn_owner = scope.prefix().map(|o| format!("{o}.{}", f.name));
                strip_function(
                    src,
                    &f.args,
                    f.returns.as_deref(),
                    fn_owner.as_deref(),
                    matches!(scope, Scope::Class(_)),
                    edits,
                    archive,
                );
                strip_block(&f.body, src, Scope::Nested, edits, archive);
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                let fn_owner = scope.prefix().map(|o| format!("{o}.{}", f.name));
                strip_function(
                    src,
                    &f.args,
                    f.returns.as_deref(),
                    fn_owner.as_deref(),
                    matches!(scope, Scope::Class(_)),
                    edits,
                    archive,
                );
                strip_block(&f.body, src, Scope::Nested, edits, archive);
            }
            ast::Stmt::ClassDef(c) => {
                match scope.prefix() {
                    Some(o) => {
                        let class_owner = format!("{o}.{}", c.name);
                        strip_block(&c.body, src, Scope::Class(&class_owner), edits, archive);
                    }
                    None => strip_block(&c.body, src, Scope::Nested, edits, archive),
                }
            }
            ast::Stmt::AnnAssign(a) => {
                strip_ann_assign(a, src, scope.prefix(), edits, archive);
            }
            ast::Stmt::For(f) => {
                strip_block(&f.body, src, Scope::Nested, edits, archive);
                strip_block(&f.orelse, src, Scope::Nested, edits, archive);
            }
            ast::Stmt::While(w) => {
                strip_block(&w.body, src, Scope::Nested, edits, archive);
                strip_block(&w.orelse, src, Scope::Nested, edits, archive);
            }
            ast::Stmt::If(i) => {
                strip_block(&i.body, src, Scope::Nested, edits, archive);
                strip_block(&i.orelse, src, Scope::Nested, edits, archive);
            }
            ast::Stmt::With(w) => strip_block(&w.body, src, Scope::Nested, edits, archive),
            ast::Stmt::AsyncWith(w) => strip_block(&w.body, src, Scope::Nested, edits, archive),
            ast::Stmt::Try(t) => {
                strip_block(&t.body, src, Scope::Nested, edits, archive);
                for h in &t.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = h;
                    strip_block(&h.body, src, Scope::Nested, edits, archive);
                }
                strip_block(&t.orelse, src, Scope::Nested, edits, archive);
                strip_block(&t.finalbody, src, Scope::Nested, edits, archive);
            }
            _ => {}
        }
    }
}

fn strip_function(
    src: &str,
    args: &ast::Arguments,
    returns: Option<&ast::Expr>,
    owner: Option<&str>,
    in_class: bool,
    edits: &mut Vec<Edit>,
    archive: &mut AnnotationArchive,
) {
    for (i, param) in ordered_params(args).into_iter().enumerate() {
        // A method's `self`/`cls` has no slot, so it is never archived.
        let slotless =
            in_class && i == 0 && (param.arg.as_str() == "self" || param.arg.as_str() == "cls");
        if let Some(ann) = &param.annotation {
            let name_end = param.range().start().to_usize() + param.arg.as_str().len();
            let ann_end = ann.range().end().to_usize();
            edits.push(Edit {
                start: name_end,
                end: ann_end,
                replacement: String::new(),
            });
            if let Some(owner) = owner {
                if !slotless {
                    archive.entries.push(ArchiveEntry {
                        slot: format!("{owner}#param({})", param.arg),
                        type_expr: expr_text(src, ann),
                    });
                }
            }
        }
    }
    if let Some(ret) = returns {
        let ret_start = ret.range().start().to_usize();
        let ret_end = ret.range().end().to_usize();
        if let Some(anchor) = arrow_anchor(src, ret_start) {
            edits.push(Edit {
                start: anchor,
                end: ret_end,
                replacement: String::new(),
            });
            if let Some(owner) = owner {
                archive.entries.push(ArchiveEntry {
                    slot: format!("{owner}#return"),
                    type_expr: expr_text(src, ret),
                });
            }
        }
    }
}

fn strip_ann_assign(
    a: &ast::StmtAnnAssign,
    src: &str,
    owner: Option<&str>,
    edits: &mut Vec<Edit>,
    archive: &mut AnnotationArchive,
) {
    let ast::Expr::Name(target) = a.target.as_ref() else {
        return;
    };
    let target_end = a.target.range().end().to_usize();
    let ann_end = a.annotation.range().end().to_usize();
    edits.push(Edit {
        start: target_end,
        end: if a.value.is_some() {
            ann_end
        } else {
            // Bare `x: T` collapses to the target name.
            a.range.end().to_usize()
        },
        replacement: String::new(),
    });
    if let Some(owner) = owner {
        archive.entries.push(ArchiveEntry {
            slot: format!("{owner}.{}#var", target.id),
            type_expr: expr_text(src, &a.annotation),
        });
    }
}

fn expr_text(src: &str, expr: &ast::Expr) -> String {
    src[expr.range().start().to_usize()..expr.range().end().to_usize()]
        .trim()
        .to_string()
}

/// Offset right after the `)` preceding the `->` of a return annotation.
fn arrow_anchor(src: &str, returns_start: usize) -> Option<usize> {
    let bytes = src.as_bytes();
    let mut p = returns_start;
    while p > 0 && matches!(bytes[p - 1], b' ' | b'\t') {
        p -= 1;
    }
    if p < 2 || &src[p - 2..p] != "->" {
        return None;
    }
    p -= 2;
    while p > 0 && matches!(bytes[p - 1], b' ' | b'\t' | b'\n' | b'\r' | b'\\') {
        p -= 1;
    }
    (p > 0 && bytes[p - 1] == b')').then_some(p)
}

/// Remove docstring lines carrying `:type`/`:rtype` markers.
fn strip_docstring_lines(body: &[ast::Stmt], src: &str, edits: &mut Vec<Edit>) {
    fn docstring_range(body: &[ast::Stmt]) -> Option<ast::text_size::TextRange> {
        if let Some(ast::Stmt::Expr(e)) = body.first() {
            if let ast::Expr::Constant(c) = e.value.as_ref() {
                if matches!(c.value, ast::Constant::Str(_)) {
                    return Some(c.range);
                }
            }
        }
        None
    }

    fn walk(body: &[ast::Stmt], src: &str, edits: &mut Vec<Edit>) {
        if let Some(range) = docstring_range(body) {
            let start = range.start().to_usize();
            let end = range.end().to_usize();
            let mut pos = start;
            while pos < end {
                let line_end = src[pos..end].find('\n').map(|i| pos + i + 1).unwrap_or(end);
                let line = &src[pos..line_end];
                let trimmed = line.trim();
                let interior = pos > start && line_end < end;
                if interior && (trimmed.starts_with(":type") || trimmed.starts_with(":rtype")) {
                    edits.push(Edit {
                        start: pos,
                        end: line_end,
                        replacement: String::new(),
                    });
                }
                pos = line_end;
            }
        }
        for stmt in body {
            match stmt {
                ast::Stmt::FunctionDef(f) => walk(&f.body, src, edits),
                ast::Stmt::AsyncFunctionDef(f) => walk(&f.body, src, edits),
                ast::Stmt::ClassDef(c) => walk(&c.body, src, edits),
                _ => {}
            }
        }
    }

    walk(body, src, edits);
}

/// Remove the marker line plus the contiguous import lines that follow it.
fn strip_import_block(src: &str, edits: &mut Vec<Edit>) {
    let mut pos = 0;
    while pos < src.len() {
        let line_end = src[pos..].find('\n').map(|i| pos + i + 1).unwrap_or(src.len());
        if src[pos..line_end].trim() == IMPORT_BLOCK_MARKER {
            let mut end = line_end;
            while end < src.len() {
                let next_end = src[end..].find('\n').map(|i| end + i + 1).unwrap_or(src.len());
                let line = src[end..next_end].trim();
                if line.starts_with("import ") || line.starts_with("from ") {
                    end = next_end;
                } else {
                    break;
                }
            }
            edits.push(Edit {
                start: pos,
                end,
                replacement: String::new(),
            });
            pos = end;
        } else {
            pos = line_end;
        }
    }
}

/// Names importable from `typing`.
const TYPING_NAMES: &[&str] = &[
    "Any", "AnyStr", "AsyncGenerator", "AsyncIterable", "AsyncIterator", "Awaitable", "Callable",
    "ClassVar", "Coroutine", "DefaultDict", "Deque", "Dict", "Final", "FrozenSet", "Generator",
    "Generic", "Hashable", "IO", "Iterable", "Iterator", "List", "Literal", "Mapping",
    "MutableMapping", "MutableSequence", "MutableSet", "NamedTuple", "NoReturn", "Optional",
    "OrderedDict", "Protocol", "Sequence", "Set", "Sized", "Text", "TextIO", "Tuple", "Type",
    "TypedDict", "Union",
];

/// Builtin names that never need an import.
const BUILTIN_NAMES: &[&str] = &[
    "None", "bool", "bytearray", "bytes", "classmethod", "complex", "dict", "float", "frozenset",
    "int", "list", "memoryview", "object", "property", "range", "set", "slice", "staticmethod",
    "str", "tuple", "type",
];

/// Insert annotations at the slots named by `bindings`, adding any imports
/// the inserted names require in one marked block per file.
///
/// Editing is span-based: bytes outside the edited spans are preserved.
pub fn apply_annotations(
    repo: &SourceRepo,
    bindings: &BTreeMap<SlotId, String>,
) -> Result<SourceRepo, FrontendError> {
    if bindings.is_empty() {
        return Ok(repo.clone());
    }
    for type_expr in bindings.values() {
        crate::types::normalize_type(type_expr)?;
    }
    let index = extract_entities(repo);
    for slot in bindings.keys() {
        let entity = index
            .get(&slot.entity)
            .ok_or_else(|| FrontendError::UnknownSlot(slot.text()))?;
        let role_ok = matches!(
            (&slot.role, entity.kind),
            (SlotRole::Var, EntityKind::Variable)
                | (SlotRole::Param(_) | SlotRole::Return, EntityKind::Function)
        );
        if !role_ok || !entity.slots.iter().any(|s| s.id == *slot) {
            return Err(FrontendError::UnknownSlot(slot.text()));
        }
    }

    // Group slots per file via the entity defining spans.
    let mut per_file: BTreeMap<String, Vec<(&SlotId, &String)>> = BTreeMap::new();
    for (slot, ty) in bindings {
        let file = index.get(&slot.entity).unwrap().defining_span.file.clone();
        per_file.entry(file).or_default().push((slot, ty));
    }

    let mut files = Vec::with_capacity(repo.files.len());
    for file in &repo.files {
        let Some(slots) = per_file.get(&file.path) else {
            files.push(file.clone());
            continue;
        };
        let module = parse_module(&file.text, &file.path)?;
        let module_path = SourceRepo::module_path(&file.path);
        let mut edits = Vec::new();
        let mut inserted_names: BTreeSet<String> = BTreeSet::new();

        for (slot, ty) in slots {
            insert_annotation(&file.text, &module, &module_path, slot, ty, &mut edits)?;
            collect_annotation_names(ty, &mut inserted_names);
        }

        let import_lines = needed_imports(&inserted_names, &module, &module_path, &index);
        if !import_lines.is_empty() {
            let at = import_anchor(&file.text, &module);
            let mut block = String::from(IMPORT_BLOCK_MARKER);
            block.push('\n');
            for line in &import_lines {
                block.push_str(line);
                block.push('\n');
            }
            edits.push(Edit {
                start: at,
                end: at,
                replacement: block,
            });
        }

        let rewritten = apply_edits(&file.text, edits);
        parse_module(&rewritten, &file.path)?;
        files.push(SourceFile {
            path: file.path.clone(),
            text: rewritten,
        });
    }

    Ok(SourceRepo {
        root: repo.root.clone(),
        files,
    })
}

fn insert_annotation(
    src: &str,
    module: &ast::ModModule,
    module_path: &str,
    slot: &SlotId,
    ty: &str,
    edits: &mut Vec<Edit>,
) -> Result<(), FrontendError> {
    let found = find_definition(&module.body, module_path, &slot.entity);
    let Some(def) = found else {
        return Err(FrontendError::UnknownSlot(slot.text()));
    };
    match (&slot.role, def) {
        (SlotRole::Param(name), Definition::Function(args, _, _)) => {
            let param = ordered_params(args)
                .into_iter()
                .find(|p| p.arg.as_str() == name)
                .ok_or_else(|| FrontendError::UnknownSlot(slot.text()))?;
            let name_end = param.range().start().to_usize() + param.arg.as_str().len();
            match &param.annotation {
                Some(old) => edits.push(Edit {
                    start: name_end,
                    end: old.range().end().to_usize(),
                    replacement: format!(": {ty}"),
                }),
                None => edits.push(Edit {
                    start: name_end,
                    end: name_end,
                    replacement: format!(": {ty}"),
                }),
            }
        }
        (SlotRole::Return, Definition::Function(args, returns, range)) => match returns {
            Some(old) => {
                let anchor = arrow_anchor(src, old.range().start().to_usize())
                    .ok_or_else(|| FrontendError::UnknownSlot(slot.text()))?;
                edits.push(Edit {
                    start: anchor,
                    end: old.range().end().to_usize(),
                    replacement: format!(" -> {ty}"),
                });
            }
            None => {
                let close = find_close_paren(src, range.start().to_usize(), args)
                    .ok_or_else(|| FrontendError::UnknownSlot(slot.text()))?;
                edits.push(Edit {
                    start: close + 1,
                    end: close + 1,
                    replacement: format!(" -> {ty}"),
                });
            }
        },
        (SlotRole::Var, Definition::Assign(target_end)) => {
            edits.push(Edit {
                start: target_end,
                end: target_end,
                replacement: format!(": {ty}"),
            });
        }
        (SlotRole::Var, Definition::AnnAssign(target_end, ann_end)) => {
            edits.push(Edit {
                start: target_end,
                end: ann_end,
                replacement: format!(": {ty}"),
            });
        }
        _ => return Err(FrontendError::UnknownSlot(slot.text())),
    }
    Ok(())
}

enum Definition<'a> {
    Function(&'a ast::Arguments, Option<&'a ast::Expr>, ast::text_size::TextRange),
    /// Unannotated assignment: end offset of the matching target name.
    Assign(usize),
    /// Annotated assignment: (target end, annotation end).
    AnnAssign(usize, usize),
}

fn find_definition<'a>(
    body: &'a [ast::Stmt],
    prefix: &str,
    entity: &EntityId,
) -> Option<Definition<'a>> {
    for stmt in body {
        match stmt {
            ast::Stmt::FunctionDef(f) => {
                if format!("{prefix}.{}", f.name) == entity.0 {
                    return Some(Definition::Function(&f.args, f.returns.as_deref(), f.range));
                }
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                if format!("{prefix}.{}", f.name) == entity.0 {
                    return Some(Definition::Function(&f.args, f.returns.as_deref(), f.range));
                }
            }
            ast::Stmt::ClassDef(c) => {
                let class_prefix = format!("{prefix}.{}", c.name);
                if entity.0.starts_with(&format!("{class_prefix}.")) {
                    if let Some(found) = find_definition(&c.body, &class_prefix, entity) {
                        return Some(found);
                    }
                }
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    if let ast::Expr::Name(n) = t {
                        if format!("{prefix}.{}", n.id) == entity.0 {
                            return Some(Definition::Assign(t.range().end().to_usize()));
                        }
                    }
                }
            }
            ast::Stmt::AnnAssign(a) => {
                if let ast::Expr::Name(n) = a.target.as_ref() {
                    if format!("{prefix}.{}", n.id) == entity.0 {
                        return Some(Definition::AnnAssign(
                            a.target.range().end().to_usize(),
                            a.annotation.range().end().to_usize(),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    None
}

/// Offset of the `)` closing a function's parameter list, skipping
/// strings, comments, and nested brackets.
fn find_close_paren(src: &str, def_start: usize, _args: &ast::Arguments) -> Option<usize> {
    let bytes = src.as_bytes();
    let open = src[def_start..].find('(')? + def_start;
    let mut depth = 0usize;
    let mut i = open;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth == 0 && bytes[i] == b')' {
                    return Some(i);
                }
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' | b'\'' => {
                i = skip_string(src, i)?;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Offset just past a string literal starting at `start` (quote char).
fn skip_string(src: &str, start: usize) -> Option<usize> {
    let bytes = src.as_bytes();
    let quote = bytes[start];
    let triple = src[start..].len() >= 3 && bytes[start + 1] == quote && bytes[start + 2] == quote;
    let (delim_len, mut i) = if triple { (3, start + 3) } else { (1, start + 1) };
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if bytes[i] == quote {
            if !triple {
                return Some(i + 1);
            }
            if src[i..].len() >= 3 && bytes[i + 1] == quote && bytes[i + 2] == quote {
                return Some(i + delim_len);
            }
        }
        i += 1;
    }
    None
}

/// Root identifiers appearing in a type expression.
fn collect_annotation_names(ty: &str, out: &mut BTreeSet<String>) {
    fn walk(e: &ast::Expr, out: &mut BTreeSet<String>) {
        match e {
            ast::Expr::Name(n) => {
                out.insert(n.id.to_string());
            }
            ast::Expr::Attribute(a) => {
                // Only the chain root is importable.
                let mut base = a.value.as_ref();
                while let ast::Expr::Attribute(inner) = base {
                    base = inner.value.as_ref();
                }
                if let ast::Expr::Name(n) = base {
                    out.insert(n.id.to_string());
                }
            }
            ast::Expr::Subscript(s) => {
                walk(&s.value, out);
                walk(&s.slice, out);
            }
            ast::Expr::Tuple(t) => t.elts.iter().for_each(|e| walk(e, out)),
            ast::Expr::List(l) => l.elts.iter().for_each(|e| walk(e, out)),
            ast::Expr::BinOp(b) => {
                walk(&b.left, out);
                walk(&b.right, out);
            }
            ast::Expr::Constant(c) => {
                if let ast::Constant::Str(s) = &c.value {
                    if let Ok(ast::Mod::Expression(m)) =
                        rustpython_parser::parse(s, rustpython_parser::Mode::Expression, "<ann>")
                    {
                        walk(&m.body, out);
                    }
                }
            }
            _ => {}
        }
    }
    if let Ok(ast::Mod::Expression(m)) =
        rustpython_parser::parse(ty, rustpython_parser::Mode::Expression, "<ann>")
    {
        walk(&m.body, out);
    }
}

/// Deterministic import lines for names that are not already bound in the
/// module: typing names, `contextvars.ContextVar`, and classes defined in
/// other modules of the repo.
fn needed_imports(
    names: &BTreeSet<String>,
    module: &ast::ModModule,
    module_path: &str,
    index: &super::entities::EntityIndex,
) -> Vec<String> {
    let mut bound: BTreeSet<String> = BTreeSet::new();
    for stmt in &module.body {
        match stmt {
            ast::Stmt::Import(imp) => {
                for a in &imp.names {
                    bound.insert(
                        a.asname
                            .as_ref()
                            .map(|s| s.to_string())
                            .unwrap_or_else(|| a.name.split('.').next().unwrap().to_string()),
                    );
                }
            }
            ast::Stmt::ImportFrom(imp) => {
                for a in &imp.names {
                    bound.insert(
                        a.asname
                            .as_ref()
                            .map(|s| s.to_string())
                            .unwrap_or_else(|| a.name.to_string()),
                    );
                }
            }
            ast::Stmt::ClassDef(c) => {
                bound.insert(c.name.to_string());
            }
            ast::Stmt::FunctionDef(f) => {
                bound.insert(f.name.to_string());
            }
            ast::Stmt::AsyncFunctionDef(f) => {
                bound.insert(f.name.to_string());
            }
            ast::Stmt::Assign(a) => {
                for t in &a.targets {
                    if let ast::Expr::Name(n) = t {
                        bound.insert(n.id.to_string());
                    }
                }
            }
            ast::Stmt::AnnAssign(a) => {
                if let ast::Expr::Name(n) = a.target.as_ref() {
                    bound.insert(n.id.to_string());
                }
            }
            _ => {}
        }
    }

    let mut lines = BTreeSet::new();
    for name in names {
        if BUILTIN_NAMES.contains(&name.as_str()) || bound.contains(name) {
            continue;
        }
        if TYPING_NAMES.contains(&name.as_str()) {
            lines.insert(format!("from typing import {name}"));
            continue;
        }
        if name == "ContextVar" || name == "Token" {
            lines.insert(format!("from contextvars import {name}"));
            continue;
        }
        // A class defined elsewhere in the repo; smallest module wins ties.
        let mut source_module: Option<String> = None;
        for (id, entity) in index.iter() {
            if entity.kind == EntityKind::Class
                && id.basename() == name
                && entity.enclosing_class.is_none()
            {
                let module_of = id
                    .0
                    .strip_suffix(&format!(".{name}"))
                    .unwrap_or("")
                    .to_string();
                if module_of != module_path
                    && source_module.as_ref().is_none_or(|m| module_of < *m)
                {
                    source_module = Some(module_of);
                }
            }
        }
        if let Some(m) = source_module {
            lines.insert(format!("from {m} import {name}"));
        }
    }
    lines.into_iter().collect()
}

/// Offset at which the import block is inserted: the line after the last
/// import of the file prelude, or after the module docstring, or 0.
fn import_anchor(src: &str, module: &ast::ModModule) -> usize {
    let lines = LineIndex::new(src);
    let mut anchor = 0;
    for (i, stmt) in module.body.iter().enumerate() {
        let is_docstring = i == 0
            && matches!(stmt, ast::Stmt::Expr(e)
                if matches!(e.value.as_ref(), ast::Expr::Constant(c)
                    if matches!(c.value, ast::Constant::Str(_))));
        let is_import = matches!(stmt, ast::Stmt::Import(_) | ast::Stmt::ImportFrom(_));
        if is_docstring || is_import {
            let end = stmt.range().end().to_usize();
            let (line, _) = lines.locate(end);
            anchor = lines
                .line_start(line + 1)
                .unwrap_or(src.len());
        } else {
            break;
        }
    }
    anchor
}
