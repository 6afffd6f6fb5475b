//! Parsing and canonicalization of Python type expressions.
//!
//! A type expression such as `Optional[List[int]]` is parsed with the
//! Python expression grammar and rewritten into a canonical form:
//! `Union[None, list[int]]`. Canonicalization is idempotent, maps typing
//! aliases to their builtin heads, rewrites `Optional[X]` and `X | Y` into
//! sorted, deduplicated `Union[...]` forms, and reduces dotted names to
//! their final segment. Two type expressions are considered equal exactly
//! when their canonical texts are equal.

use rustpython_parser::{ast, parse, Mode};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TypeError {
    #[error("invalid type expression `{expr}`: {reason}")]
    InvalidTypeExpression { expr: String, reason: String },
}

/// One node of a canonicalized type expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TypeNode {
    /// `head` with optional subscript arguments, e.g. `list[int]`.
    Named { head: String, args: Vec<TypeNode> },
    /// A bracketed parameter list, as in `Callable[[int, str], bool]`.
    Group(Vec<TypeNode>),
    /// The `...` placeholder.
    Ellipsis,
    /// A verbatim literal argument inside `Literal[...]`.
    LiteralArg(String),
}

/// A type expression in canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedType {
    pub text: String,
    pub node: TypeNode,
}

impl NormalizedType {
    pub fn is_any(&self) -> bool {
        matches!(&self.node, TypeNode::Named { head, .. } if head == "Any")
    }

    pub fn is_union(&self) -> bool {
        matches!(&self.node, TypeNode::Named { head, .. } if head == "Union")
    }

    /// Head name of the outermost constructor, e.g. `list` for `list[int]`.
    pub fn head(&self) -> &str {
        match &self.node {
            TypeNode::Named { head, .. } => head,
            TypeNode::Ellipsis => "...",
            TypeNode::Group(_) | TypeNode::LiteralArg(_) => "",
        }
    }

    /// Union member nodes; a non-union type is its own single member.
    pub fn union_members(&self) -> Vec<&TypeNode> {
        match &self.node {
            TypeNode::Named { head, args } if head == "Union" => args.iter().collect(),
            other => vec![other],
        }
    }
}

impl fmt::Display for NormalizedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Typing-module aliases that canonicalize to builtin heads.
fn builtin_alias(head: &str) -> Option<&'static str> {
    Some(match head {
        "List" => "list",
        "Dict" => "dict",
        "Set" => "set",
        "FrozenSet" => "frozenset",
        "Tuple" => "tuple",
        "Type" => "type",
        "Text" => "str",
        "Deque" => "deque",
        "DefaultDict" => "defaultdict",
        "NoneType" => "None",
        _ => return None,
    })
}

/// Wrappers that carry no type identity of their own.
fn is_transparent_wrapper(head: &str) -> bool {
    matches!(head, "Annotated" | "ClassVar" | "Final")
}

/// Parse and canonicalize a type expression.
pub fn normalize_type(expr: &str) -> Result<NormalizedType, TypeError> {
    let trimmed = expr.trim();
    if trimmed.is_empty() {
        return Err(TypeError::InvalidTypeExpression {
            expr: expr.to_string(),
            reason: "empty expression".to_string(),
        });
    }
    let parsed = parse(trimmed, Mode::Expression, "<type>").map_err(|e| {
        TypeError::InvalidTypeExpression {
            expr: expr.to_string(),
            reason: e.to_string(),
        }
    })?;
    let ast::Mod::Expression(module) = parsed else {
        return Err(TypeError::InvalidTypeExpression {
            expr: expr.to_string(),
            reason: "not an expression".to_string(),
        });
    };
    let node = lower(&module.body, expr)?;
    let text = render(&node);
    Ok(NormalizedType { text, node })
}

fn invalid(expr: &str, reason: &str) -> TypeError {
    TypeError::InvalidTypeExpression {
        expr: expr.to_string(),
        reason: reason.to_string(),
    }
}

/// True for `a.b.c`-shaped chains of names.
fn is_dotted_name(e: &ast::Expr) -> bool {
    match e {
        ast::Expr::Name(_) => true,
        ast::Expr::Attribute(a) => is_dotted_name(&a.value),
        _ => false,
    }
}

fn lower(e: &ast::Expr, src: &str) -> Result<TypeNode, TypeError> {
    match e {
        ast::Expr::Name(n) => Ok(named_atom(n.id.as_str())),
        ast::Expr::Attribute(a) => {
            // `typing.List` and `pkg.mod.Cls` reduce to the final segment.
            if !is_dotted_name(e) {
                return Err(invalid(src, "unsupported attribute base"));
            }
            Ok(named_atom(a.attr.as_str()))
        }
        ast::Expr::Constant(c) => match &c.value {
            ast::Constant::None => Ok(TypeNode::Named {
                head: "None".to_string(),
                args: vec![],
            }),
            ast::Constant::Str(s) => {
                // Forward reference: parse the quoted expression.
                let inner = normalize_type(s)?;
                Ok(inner.node)
            }
            ast::Constant::Ellipsis => Ok(TypeNode::Ellipsis),
            _ => Err(invalid(src, "literal outside Literal[...]")),
        },
        ast::Expr::Subscript(s) => {
            let head = match s.value.as_ref() {
                ast::Expr::Name(n) => n.id.to_string(),
                a @ ast::Expr::Attribute(attr) => {
                    if !is_dotted_name(a) {
                        return Err(invalid(src, "unsupported subscript base"));
                    }
                    attr.attr.to_string()
                }
                _ => return Err(invalid(src, "unsupported subscript base")),
            };
            let raw_args: Vec<&ast::Expr> = match s.slice.as_ref() {
                ast::Expr::Tuple(t) => t.elts.iter().collect(),
                other => vec![other],
            };
            build_subscript(&head, &raw_args, src)
        }
        ast::Expr::BinOp(b) if matches!(b.op, ast::Operator::BitOr) => {
            // PEP 604 unions.
            let mut members = Vec::new();
            flatten_pep604(e, &mut members, src)?;
            Ok(make_union(members))
        }
        ast::Expr::List(l) => {
            let items = l
                .elts
                .iter()
                .map(|e| lower(e, src))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(TypeNode::Group(items))
        }
        _ => Err(invalid(src, "unsupported syntax in type expression")),
    }
}

fn build_subscript(raw_head: &str, raw_args: &[&ast::Expr], src: &str) -> Result<TypeNode, TypeError> {
    if raw_head == "Optional" {
        if raw_args.len() != 1 {
            return Err(invalid(src, "Optional takes exactly one argument"));
        }
        let inner = lower(raw_args[0], src)?;
        return Ok(make_union(vec![
            inner,
            TypeNode::Named {
                head: "None".to_string(),
                args: vec![],
            },
        ]));
    }
    if is_transparent_wrapper(raw_head) {
        if raw_args.is_empty() {
            return Err(invalid(src, "wrapper takes an argument"));
        }
        return lower(raw_args[0], src);
    }
    if raw_head == "Literal" {
        let args = raw_args
            .iter()
            .map(|a| literal_arg(a, src))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(TypeNode::Named {
            head: "Literal".to_string(),
            args,
        });
    }
    let head = builtin_alias(raw_head).unwrap_or(raw_head).to_string();
    let args = raw_args
        .iter()
        .map(|a| lower(a, src))
        .collect::<Result<Vec<_>, _>>()?;
    if head == "Union" {
        let mut members = Vec::new();
        for a in args {
            match a {
                TypeNode::Named { ref head, ref args } if head == "Union" => {
                    members.extend(args.clone());
                }
                other => members.push(other),
            }
        }
        return Ok(make_union(members));
    }
    Ok(TypeNode::Named { head, args })
}

fn literal_arg(e: &ast::Expr, src: &str) -> Result<TypeNode, TypeError> {
    match e {
        ast::Expr::Constant(c) => match &c.value {
            ast::Constant::Int(i) => Ok(TypeNode::LiteralArg(i.to_string())),
            ast::Constant::Str(s) => Ok(TypeNode::LiteralArg(format!("'{s}'"))),
            ast::Constant::Bool(b) => Ok(TypeNode::LiteralArg(
                if *b { "True" } else { "False" }.to_string(),
            )),
            ast::Constant::None => Ok(TypeNode::LiteralArg("None".to_string())),
            ast::Constant::Bytes(b) => Ok(TypeNode::LiteralArg(format!(
                "b'{}'",
                String::from_utf8_lossy(b)
            ))),
            _ => Err(invalid(src, "unsupported literal value")),
        },
        ast::Expr::UnaryOp(u) if matches!(u.op, ast::UnaryOp::USub) => {
            if let ast::Expr::Constant(c) = u.operand.as_ref() {
                if let ast::Constant::Int(i) = &c.value {
                    return Ok(TypeNode::LiteralArg(format!("-{i}")));
                }
            }
            Err(invalid(src, "unsupported literal value"))
        }
        _ => Err(invalid(src, "unsupported literal value")),
    }
}

fn flatten_pep604(e: &ast::Expr, out: &mut Vec<TypeNode>, src: &str) -> Result<(), TypeError> {
    if let ast::Expr::BinOp(b) = e {
        if matches!(b.op, ast::Operator::BitOr) {
            flatten_pep604(&b.left, out, src)?;
            flatten_pep604(&b.right, out, src)?;
            return Ok(());
        }
    }
    match lower(e, src)? {
        TypeNode::Named { ref head, ref args } if head == "Union" => out.extend(args.clone()),
        other => out.push(other),
    }
    Ok(())
}

fn named_atom(name: &str) -> TypeNode {
    let head = builtin_alias(name).unwrap_or(name).to_string();
    TypeNode::Named { head, args: vec![] }
}

/// Sorted, deduplicated union; a single distinct member collapses.
fn make_union(members: Vec<TypeNode>) -> TypeNode {
    let mut rendered: Vec<(String, TypeNode)> = members
        .into_iter()
        .map(|m| (render(&m), m))
        .collect();
    rendered.sort_by(|a, b| a.0.cmp(&b.0));
    rendered.dedup_by(|a, b| a.0 == b.0);
    if rendered.len() == 1 {
        return rendered.pop().unwrap().1;
    }
    TypeNode::Named {
        head: "Union".to_string(),
        args: rendered.into_iter().map(|(_, n)| n).collect(),
    }
}

fn render(node: &TypeNode) -> String {
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
