//! Text formats.
//!
//! Query/answer records, one per line, whitespace separated, all indices
//! 1-based:
//!
//! ```text
//! # query_id degree labels worker [answer]
//! 1 1 1 7 +1
//! 2 3 4,9,12 2 -1
//! ```
//!
//! The answer column is either present on every record or on none. Lines
//! starting with `#` and blank lines are ignored. When the first `m` records
//! are degree-1 queries asking every label exactly once they are read back as
//! the initialization block.
//!
//! Label files hold one `+1`/`-1` per line. Reliability tables are CSV with
//! the header `worker,degree,eps_hat`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnswerSet, LabelVector, Phase, Query, ReliabilityMatrix, TripartiteGraph};

fn sign_str(v: i8) -> &'static str {
    if v > 0 {
        "+1"
    } else {
        "-1"
    }
}

fn parse_sign(s: &str, line: usize) -> Result<i8> {
    match s {
        "+1" | "1" => Ok(1),
        "-1" => Ok(-1),
        _ => Err(Error::Parse {
            line,
            msg: format!("expected +1 or -1, found {s:?}"),
        }),
    }
}

fn parse_index(s: &str, line: usize, what: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::Parse {
            line,
            msg: format!("{what} must be a positive integer, found {s:?}"),
        }),
    }
}

/// Writes one record per query; answers are appended when given.
pub fn write_records<W: Write>(
    g: &TripartiteGraph,
    answers: Option<&AnswerSet>,
    out: &mut W,
) -> Result<()> {
    if let Some(y) = answers {
        y.check_aligned(g)?;
    }
    for q in g.queries() {
        let labels: Vec<String> = q.labels.iter().map(|i| (i + 1).to_string()).collect();
        write!(
            out,
            "{} {} {} {}",
            q.id + 1,
            q.degree(),
            labels.join(","),
            q.worker + 1
        )?;
        if let Some(y) = answers {
            write!(out, " {}", sign_str(y.get(q.id)))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parsed query/answer records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Records {
    /// `(labels, worker)` per query, 0-based.
    pub queries: Vec<(Vec<usize>, usize)>,
    pub answers: Option<Vec<i8>>,
}

impl Records {
    /// Builds the graph, taking `m` and `w` as the largest label and worker
    /// ids present.
    pub fn graph(&self) -> Result<TripartiteGraph> {
        self.graph_with_sizes(None, None)
    }

    /// Like [`Records::graph`], but `m` and `w` are at least the given sizes.
    pub fn graph_with_sizes(&self, m: Option<usize>, w: Option<usize>) -> Result<TripartiteGraph> {
        if self.queries.is_empty() {
            return Err(Error::InvalidInput("no query records".into()));
        }
        let seen_m = self
            .queries
            .iter()
            .flat_map(|(l, _)| l)
            .max()
            .map_or(0, |i| i + 1);
        let seen_w = self.queries.iter().map(|(_, k)| k + 1).max().unwrap_or(0);
        let m = m.unwrap_or(0).max(seen_m);
        let w = w.unwrap_or(0).max(seen_w);
        let init_block = self.queries.len() >= m && {
            let mut seen = vec![false; m];
            self.queries[..m].iter().all(|(labels, _)| {
                labels.len() == 1 && !std::mem::replace(&mut seen[labels[0]], true)
            })
        };
        let queries = self
            .queries
            .iter()
            .enumerate()
            .map(|(j, (labels, worker))| Query {
                id: j,
                labels: labels.clone(),
                worker: *worker,
                phase: if init_block && j < m {
                    Phase::A1
                } else {
                    Phase::Unpartitioned
                },
            })
            .collect();
        TripartiteGraph::new(m, w, queries)
    }

    pub fn answer_set(&self) -> Result<AnswerSet> {
        match &self.answers {
            Some(a) => AnswerSet::new(a.clone()),
            None => Err(Error::InvalidInput("records carry no answers".into())),
        }
    }
}

pub fn read_records<R: BufRead>(input: R) -> Result<Records> {
    let mut queries = Vec::new();
    let mut answers: Vec<i8> = Vec::new();
    let mut with_answers = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let has_answer = match fields.len() {
            4 => false,
            5 => true,
            n => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 4 or 5 fields, found {n}"),
                })
            }
        };
        if *with_answers.get_or_insert(has_answer) != has_answer {
            return Err(Error::Parse {
                line: lineno,
                msg: "answer column present on some records but not others".into(),
            });
        }
        let id = parse_index(fields[0], lineno, "query id")?;
        if id != queries.len() + 1 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected query id {}, found {id}", queries.len() + 1),
            });
        }
        let degree = parse_index(fields[1], lineno, "degree")?;
        let labels = fields[2]
            .split(',')
            .map(|s| parse_index(s, lineno, "label").map(|i| i - 1))
            .collect::<Result<Vec<usize>>>()?;
        if labels.len() != degree {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("degree {degree} but {} labels", labels.len()),
            });
        }
        let worker = parse_index(fields[3], lineno, "worker")? - 1;
        if has_answer {
            answers.push(parse_sign(fields[4], lineno)?);
        }
        queries.push((labels, worker));
    }
    Ok(Records {
        queries,
        answers: with_answers.unwrap_or(false).then_some(answers),
    })
}

pub fn write_labels<W: Write>(x: &LabelVector, out: &mut W) -> Result<()> {
    for &v in x.as_slice() {
        writeln!(out, "{}", sign_str(v))?;
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(input: R) -> Result<LabelVector> {
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        values.push(parse_sign(trimmed, lineno + 1)?);
    }
    LabelVector::new(values)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReliabilityRow {
    worker: usize,
    degree: usize,
    eps_hat: f64,
}

pub fn write_reliability_csv<W: Write>(r: &ReliabilityMatrix, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (worker, degree, eps_hat) in r.entries() {
        writer.serialize(ReliabilityRow {
            worker,
            degree,
            eps_hat,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a full `worker x degree` table. Probabilities may be anywhere in
/// `[0, 1]`.
pub fn read_reliability_csv<R: std::io::Read>(input: R, lambda: f64) -> Result<ReliabilityMatrix> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let row: ReliabilityRow = row?;
        if row.worker == 0 || row.degree == 0 {
            return Err(Error::InvalidInput("worker and degree are 1-based".into()));
        }
        rows.push(row);
    }
    let w = rows.iter().map(|r| r.worker).max().unwrap_or(0);
    let max_degree = rows.iter().map(|r| r.degree).max().unwrap_or(0);
    if w == 0 {
        return Err(Error::InvalidInput("empty reliability table".into()));
    }
    let mut table = vec![vec![f64::NAN; max_degree]; w];
    for row in rows {
        table[row.worker - 1][row.degree - 1] = row.eps_hat;
    }
    for (k, row) in table.iter().enumerate() {
        if let Some(d) = row.iter().position(|e| e.is_nan()) {
            return Err(Error::InvalidInput(format!(
                "reliability table misses worker {} degree {}",
                k + 1,
                d + 1
            )));
        }
    }
    ReliabilityMatrix::new_unchecked(table, lambda)
}
