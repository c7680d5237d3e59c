//! Line-oriented script protocol: commands, parsing and rendering.
//!
//! One command per line, whitespace-separated decimal tokens, `#` starts a
//! comment. Rendering and parsing round-trip exactly, which keeps generated
//! scripts and golden files diffable.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{msg}")]
pub struct ParseError {
    pub msg: String,
}

fn parse_err(msg: impl Into<String>) -> ParseError {
    ParseError { msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// `schema E/2 F/1 ...`, declared once as the first command of a script.
    Schema(Vec<(String, usize)>),
    /// `domq <n>`: query-side domain size.
    DomQ(usize),
    /// `domd <n>`: data-side domain size.
    DomD(usize),
    /// `insq <rel> <node>...`
    InsQ {
        rel: String,
        nodes: Vec<u32>,
    },
    /// `delq <rel> <node>...`
    DelQ {
        rel: String,
        nodes: Vec<u32>,
    },
    /// `setd <rel> (<t>) (<t>)...`: whole-relation replacement.
    SetD {
        rel: String,
        tuples: Vec<Vec<u32>>,
    },
    /// `insd <rel> <elem>...`
    InsD {
        rel: String,
        elems: Vec<u32>,
    },
    /// `deld <rel> <elem>...`
    DelD {
        rel: String,
        elems: Vec<u32>,
    },
    Ask,
    Stats,
    Snapshot,
    Check,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Schema(rels) => {
                write!(f, "schema")?;
                for (name, arity) in rels {
                    write!(f, " {}/{}", name, arity)?;
                }
                Ok(())
            }
            Command::DomQ(n) => write!(f, "domq {}", n),
            Command::DomD(n) => write!(f, "domd {}", n),
            Command::InsQ { rel, nodes } => write_args(f, "insq", rel, nodes),
            Command::DelQ { rel, nodes } => write_args(f, "delq", rel, nodes),
            Command::InsD { rel, elems } => write_args(f, "insd", rel, elems),
            Command::DelD { rel, elems } => write_args(f, "deld", rel, elems),
            Command::SetD { rel, tuples } => {
                write!(f, "setd {}", rel)?;
                for t in tuples {
                    let body: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                    write!(f, " ({})", body.join(" "))?;
                }
                Ok(())
            }
            Command::Ask => write!(f, "ask"),
            Command::Stats => write!(f, "stats"),
            Command::Snapshot => write!(f, "snapshot"),
            Command::Check => write!(f, "check"),
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, kw: &str, rel: &str, args: &[u32]) -> fmt::Result {
    write!(f, "{} {}", kw, rel)?;
    for a in args {
        write!(f, " {}", a)?;
    }
    Ok(())
}

/// Renders a command list as script text, one command per line.
pub fn render_script(commands: &[Command]) -> String {
    let mut out = String::new();
    for c in commands {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

/// Parses one script line. Blank lines and `#` comments yield `None`.
pub fn parse_line(line: &str) -> Result<Option<Command>, ParseError> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let Some((&kw, rest)) = tokens.split_first() else {
        return Ok(None);
    };
    let cmd = match kw {
        "schema" => {
            if rest.is_empty() {
                return Err(parse_err("schema needs at least one relation"));
            }
            let mut rels = Vec::new();
            for tok in rest {
                let (name, arity) = tok
                    .split_once('/')
                    .ok_or_else(|| parse_err(format!("expected name/arity, got `{}`", tok)))?;
                let arity: usize = arity
                    .parse()
                    .map_err(|_| parse_err(format!("bad arity in `{}`", tok)))?;
                rels.push((name.to_string(), arity));
            }
            Command::Schema(rels)
        }
        "domq" => Command::DomQ(parse_single(rest)?),
        "domd" => Command::DomD(parse_single(rest)?),
        "insq" => {
            let (rel, nodes) = parse_rel_args(rest)?;
            Command::InsQ { rel, nodes }
        }
        "delq" => {
            let (rel, nodes) = parse_rel_args(rest)?;
            Command::DelQ { rel, nodes }
        }
        "insd" => {
            let (rel, elems) = parse_rel_args(rest)?;
            Command::InsD { rel, elems }
        }
        "deld" => {
            let (rel, elems) = parse_rel_args(rest)?;
            Command::DelD { rel, elems }
        }
        "setd" => {
            let Some((&rel, groups)) = rest.split_first() else {
                return Err(parse_err("setd needs a relation"));
            };
            Command::SetD {
                rel: rel.to_string(),
                tuples: parse_tuple_groups(groups)?,
            }
        }
        "ask" => arg_free(rest, Command::Ask)?,
        "stats" => arg_free(rest, Command::Stats)?,
        "snapshot" => arg_free(rest, Command::Snapshot)?,
        "check" => arg_free(rest, Command::Check)?,
        other => return Err(parse_err(format!("unknown command `{}`", other))),
    };
    Ok(Some(cmd))
}

fn arg_free(rest: &[&str], cmd: Command) -> Result<Command, ParseError> {
    if rest.is_empty() {
        Ok(cmd)
    } else {
        Err(parse_err(format!("`{}` takes no arguments", cmd)))
    }
}

fn parse_single(rest: &[&str]) -> Result<usize, ParseError> {
    match rest {
        [one] => one
            .parse()
            .map_err(|_| parse_err(format!("bad number `{}`", one))),
        _ => Err(parse_err("expected exactly one number")),
    }
}

fn parse_rel_args(rest: &[&str]) -> Result<(String, Vec<u32>), ParseError> {
    let Some((&rel, args)) = rest.split_first() else {
        return Err(parse_err("expected a relation name"));
    };
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        out.push(
            a.parse()
                .map_err(|_| parse_err(format!("bad number `{}`", a)))?,
        );
    }
    Ok((rel.to_string(), out))
}

/// Parses `( a b ) ( c d )` groups; parentheses may touch the numbers.
fn parse_tuple_groups(groups: &[&str]) -> Result<Vec<Vec<u32>>, ParseError> {
    let mut tuples = Vec::new();
    let mut current: Option<Vec<u32>> = None;
    for tok in groups {
        let mut tok = *tok;
        if let Some(stripped) = tok.strip_prefix('(') {
            if current.is_some() {
                return Err(parse_err("nested `(`"));
            }
            current = Some(Vec::new());
            tok = stripped;
        }
        let closes = if let Some(stripped) = tok.strip_suffix(')') {
            tok = stripped;
            true
        } else {
            false
        };
        if !tok.is_empty() {
            let cur = current
                .as_mut()
                .ok_or_else(|| parse_err("number outside `(...)`"))?;
            cur.push(
                tok.parse()
                    .map_err(|_| parse_err(format!("bad number `{}`", tok)))?,
            );
        }
        if closes {
            let done = current.take().ok_or_else(|| parse_err("unmatched `)`"))?;
            tuples.push(done);
        }
    }
    if current.is_some() {
        return Err(parse_err("unclosed `(`"));
    }
    Ok(tuples)
}
