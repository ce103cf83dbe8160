//! Line-delimited text persistence for [`SocialGraph`].
//!
//! One record per line, `#` starts a comment line. Fields are `key=value`
//! tokens separated by single spaces and must appear in this order:
//!
//! ```text
//! catalog attributes=<n> preferences=<n>
//! user id=<id> lat=<deg> lon=<deg> activities=<n> attributes=<f,..> preferences=<f,..>
//! store id=<id> lat=<deg> lon=<deg> events=<id:capacity:start:end;..> venues=<name;..>
//! edge a=<id> b=<id> tasks=<n> created=<t> weight=<f>
//! task id=<id> a=<id> b=<id> status=<issued|completed|expired> issued=<t> completed=<t|-> deadline=<t|-> prop=<id|->
//! ```
//!
//! `catalog` must precede every other record and records may only reference
//! users declared above them. The `weight` field is informational: weights
//! are recomputed from the task count when loading.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{
    Catalog, EventListing, GeoPoint, GraphError, OfflineTask, SocialGraph, Store, TaskStatus,
    UserProfile,
};
use crate::rewards::RewardParams;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error("missing `catalog` record")]
    MissingCatalog,
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_owned(), ToString::to_string)
}

fn status_str(s: TaskStatus) -> &'static str {
    match s {
        TaskStatus::Issued => "issued",
        TaskStatus::Completed => "completed",
        TaskStatus::Expired => "expired",
    }
}

pub fn write_graph<W: Write>(graph: &SocialGraph, mut out: W) -> io::Result<()> {
    let c = graph.catalog();
    writeln!(
        out,
        "catalog attributes={} preferences={}",
        c.attributes, c.preferences
    )?;
    for u in graph.users() {
        writeln!(
            out,
            "user id={} lat={} lon={} activities={} attributes={} preferences={}",
            u.id,
            u.location.lat,
            u.location.lon,
            u.activity_count,
            join(&u.attributes, ","),
            join(&u.preferences, ",")
        )?;
    }
    for s in graph.stores() {
        let mut events = String::new();
        for (i, e) in s.events.iter().enumerate() {
            if i > 0 {
                events.push(';');
            }
            let _ = write!(events, "{}:{}:{}:{}", e.id, e.capacity, e.start, e.end);
        }
        writeln!(
            out,
            "store id={} lat={} lon={} events={} venues={}",
            s.id,
            s.location.lat,
            s.location.lon,
            events,
            s.venues.join(";")
        )?;
    }
    for e in graph.edges() {
        writeln!(
            out,
            "edge a={} b={} tasks={} created={} weight={}",
            e.a, e.b, e.tasks, e.created_at, e.weight
        )?;
    }
    for t in graph.tasks() {
        writeln!(
            out,
            "task id={} a={} b={} status={} issued={} completed={} deadline={} prop={}",
            t.id,
            t.a,
            t.b,
            status_str(t.status),
            t.issued_at,
            opt(&t.completed_at),
            opt(&t.deadline),
            opt(&t.reward_prop)
        )?;
    }
    Ok(())
}

struct Fields<'a> {
    line: usize,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self, key: &str) -> Result<&'a str, ParseError> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| self.err(format!("missing field `{key}`")))?;
        match tok.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected `{key}=`, found `{tok}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ParseError> {
        let v = self.next(key)?;
        v.parse()
            .map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn parse_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ParseError> {
        let v = self.next(key)?;
        if v == "-" {
            return Ok(None);
        }
        v.parse()
            .map(Some)
            .map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>, ParseError> {
        let v = self.next(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|x| {
                x.parse()
                    .map_err(|_| self.err(format!("bad number `{x}` in `{key}`")))
            })
            .collect()
    }

    fn finish(mut self) -> Result<(), ParseError> {
        match self.tokens.next() {
            Some(extra) => Err(self.err(format!("unexpected field `{extra}`"))),
            None => Ok(()),
        }
    }
}

/// Parses a graph. Weights are recomputed from `params`.
pub fn read_graph<R: BufRead>(input: R, params: RewardParams) -> Result<SocialGraph, ParseError> {
    let mut graph: Option<SocialGraph> = None;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        let mut f = Fields {
            line: line_no,
            tokens,
        };
        let graph_err = |source| ParseError::Graph {
            line: line_no,
            source,
        };

        if tag == "catalog" {
            if graph.is_some() {
                return Err(f.err("duplicate `catalog` record"));
            }
            let catalog = Catalog {
                attributes: f.parse("attributes")?,
                preferences: f.parse("preferences")?,
            };
            f.finish()?;
            graph = Some(SocialGraph::new(catalog, params).map_err(graph_err)?);
            continue;
        }
        if !matches!(tag, "user" | "store" | "edge" | "task") {
            return Err(f.err(format!("unknown record tag `{tag}`")));
        }
        let g = graph.as_mut().ok_or(ParseError::MissingCatalog)?;
        match tag {
            "user" => {
                let id: String = f.parse("id")?;
                let lat = f.parse("lat")?;
                let lon = f.parse("lon")?;
                let activities = f.parse("activities")?;
                let attributes = f.floats("attributes")?;
                let preferences = f.floats("preferences")?;
                f.finish()?;
                let mut p = UserProfile::new(id, GeoPoint::new(lat, lon))
                    .with_features(attributes, preferences);
                p.activity_count = activities;
                g.add_user(p).map_err(graph_err)?;
            }
            "store" => {
                let id: String = f.parse("id")?;
                let lat = f.parse("lat")?;
                let lon = f.parse("lon")?;
                let events_raw = f.next("events")?;
                let mut events = Vec::new();
                for ev in events_raw.split(';').filter(|s| !s.is_empty()) {
                    let parts: Vec<&str> = ev.split(':').collect();
                    let parsed = match parts.as_slice() {
                        [id, cap, start, end] => (|| {
                            Some(EventListing {
                                id: (*id).to_owned(),
                                capacity: cap.parse().ok()?,
                                start: start.parse().ok()?,
                                end: end.parse().ok()?,
                            })
                        })(),
                        _ => None,
                    };
                    events.push(parsed.ok_or_else(|| f.err(format!("bad event `{ev}`")))?);
                }
                let venues = f
                    .next("venues")?
                    .split(';')
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect();
                f.finish()?;
                g.add_store(Store {
                    id: id.into(),
                    location: GeoPoint::new(lat, lon),
                    events,
                    venues,
                })
                .map_err(graph_err)?;
            }
            "edge" => {
                let a: String = f.parse("a")?;
                let b: String = f.parse("b")?;
                let tasks = f.parse("tasks")?;
                let created = f.parse("created")?;
                let _weight: f64 = f.parse("weight")?;
                f.finish()?;
                g.insert_loaded_edge(&a.into(), &b.into(), tasks, created)
                    .map_err(graph_err)?;
            }
            "task" => {
                let id: String = f.parse("id")?;
                let a: String = f.parse("a")?;
                let b: String = f.parse("b")?;
                let status = match f.next("status")? {
                    "issued" => TaskStatus::Issued,
                    "completed" => TaskStatus::Completed,
                    "expired" => TaskStatus::Expired,
                    other => return Err(f.err(format!("bad task status `{other}`"))),
                };
                let issued_at = f.parse("issued")?;
                let completed_at = f.parse_opt("completed")?;
                let deadline = f.parse_opt("deadline")?;
                let reward_prop: Option<String> = f.parse_opt("prop")?;
                f.finish()?;
                g.insert_loaded_task(OfflineTask {
                    id: id.into(),
                    a: a.into(),
                    b: b.into(),
                    status,
                    issued_at,
                    completed_at,
                    deadline,
                    reward_prop: reward_prop.map(Into::into),
                })
                .map_err(graph_err)?;
            }
            _ => unreachable!(),
        }
    }
    graph.ok_or(ParseError::MissingCatalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::socialgraph::UserId;

    fn params() -> RewardParams {
        RewardParams::new(0.5, 1.0, 0.7, 3.0).unwrap()
    }

    const SAMPLE: &str = "\
# demo
catalog attributes=1 preferences=2
user id=a lat=1.5 lon=2 activities=3 attributes=0.25 preferences=0.1,0.2
user id=b lat=-1 lon=179.5 activities=0 attributes=1 preferences=0,0
store id=s lat=0 lon=0 events=e1:20:0:10;e2:5:3:4 venues=hall;yard
edge a=a b=b tasks=4 created=7 weight=0.5
task id=t1 a=a b=b status=completed issued=1 completed=2 deadline=- prop=bone
task id=t2 a=b b=a status=issued issued=3 completed=- deadline=9 prop=-
";

    #[test]
    fn parses_and_rewrites_identically() {
        let g = read_graph(SAMPLE.as_bytes(), params()).unwrap();
        assert_eq!(g.user_count(), 2);
        let e = g.edge(&UserId::from("a"), &UserId::from("b")).unwrap();
        assert_eq!(e.tasks, 4);
        assert_eq!(e.weight, params().weight(4));
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let again = read_graph(buf.as_slice(), params()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn unknown_tag_reports_line() {
        let text = "catalog attributes=0 preferences=0\nfriend a=1\n";
        let err = read_graph(text.as_bytes(), params()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: unknown record tag `friend`");
    }

    #[test]
    fn field_order_is_enforced() {
        let text = "catalog attributes=0 preferences=0\nuser lat=1 id=a lon=0 activities=0 attributes= preferences=\n";
        let err = read_graph(text.as_bytes(), params()).unwrap_err();
        assert!(err.to_string().starts_with("line 2: expected `id=`"));
    }

    #[test]
    fn edge_before_user_is_rejected() {
        let text = "catalog attributes=0 preferences=0\nedge a=x b=y tasks=1 created=0 weight=0\n";
        let err = read_graph(text.as_bytes(), params()).unwrap_err();
        assert!(matches!(err, ParseError::Graph { line: 2, .. }));
    }

    #[test]
    fn catalog_required() {
        let err = read_graph("user id=a\n".as_bytes(), params()).unwrap_err();
        assert!(matches!(err, ParseError::MissingCatalog));
    }
}
