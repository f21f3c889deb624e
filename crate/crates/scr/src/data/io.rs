//! Text file formats for clicks, embeddings, style labels, and ground truth.
//!
//! - clicks: one `user_id<TAB>item_id` per line
//! - embeddings: `item_id<TAB>v1,v2,...,vD`; D inferred from the first line
//! - labels: `item_id<TAB>style|style|...`; vocabulary ordered by first appearance
//! - truth (synthetic only): `user_id<TAB>p1,p2,...,pS`

use super::{ClickMatrix, ItemEmbeddingTable, StyleLabelMatrix};
use crate::error::{Result, ScrError};
use crate::nncore::Tensor2;
use crate::Real;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct LoadStats {
    pub duplicate_clicks: usize,
    pub dropped_labels: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub clicks: ClickMatrix,
    pub embeddings: ItemEmbeddingTable,
    pub labels: StyleLabelMatrix,
    pub stats: LoadStats,
}

pub fn load_dataset(
    clicks_path: &Path,
    embeddings_path: &Path,
    labels_path: &Path,
) -> Result<LoadedData> {
    let embeddings = load_embeddings(embeddings_path)?;
    let mut stats = LoadStats::default();
    let clicks = load_clicks(clicks_path, &embeddings, &mut stats)?;
    let labels = load_labels(labels_path, &embeddings, &mut stats)?;
    Ok(LoadedData {
        clicks,
        embeddings,
        labels,
        stats,
    })
}

pub fn load_embeddings(path: &Path) -> Result<ItemEmbeddingTable> {
    let content = std::fs::read_to_string(path)?;
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<Real>> = Vec::new();
    let mut dim = None;
    for (lineno, line) in nonempty_lines(&content) {
        let (id, rest) = split_tab(path, lineno, line)?;
        let values: Vec<Real> = rest
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| {
                    ScrError::Data(format!(
                        "{}:{lineno}: bad number '{v}'",
                        path.display()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(ScrError::Data(format!(
                    "{}:{lineno}: embedding has {} values, expected {d}",
                    path.display(),
                    values.len()
                )))
            }
            _ => {}
        }
        ids.push(id.to_string());
        rows.push(values);
    }
    if ids.is_empty() {
        return Err(ScrError::Data(format!(
            "{}: empty embeddings file",
            path.display()
        )));
    }
    ItemEmbeddingTable::new(ids, Tensor2::from_rows(&rows)?)
}

/// Clicks are cross-referenced against the embedding catalog: the item list
/// of the returned matrix is the full catalog, and a clicked item without an
/// embedding is a hard error.
fn load_clicks(
    path: &Path,
    catalog: &ItemEmbeddingTable,
    stats: &mut LoadStats,
) -> Result<ClickMatrix> {
    let content = std::fs::read_to_string(path)?;
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let mut user_ids: Vec<String> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in nonempty_lines(&content) {
        let (user, item) = split_tab(path, lineno, line)?;
        let item_idx = catalog.index_of(item).ok_or_else(|| {
            ScrError::Data(format!(
                "{}:{lineno}: clicked item '{item}' has no embedding",
                path.display()
            ))
        })?;
        let user_idx = match user_index.get(user) {
            Some(&u) => u,
            None => {
                let u = user_ids.len();
                user_index.insert(user.to_string(), u);
                user_ids.push(user.to_string());
                u
            }
        };
        pairs.push((user_idx, item_idx));
    }
    let mut clicks = ClickMatrix::new(user_ids, catalog.item_ids().to_vec());
    for (u, i) in pairs {
        if !clicks.insert(u, i) {
            stats.duplicate_clicks += 1;
        }
    }
    Ok(clicks)
}

fn load_labels(
    path: &Path,
    catalog: &ItemEmbeddingTable,
    stats: &mut LoadStats,
) -> Result<StyleLabelMatrix> {
    let content = std::fs::read_to_string(path)?;
    let mut vocab: Vec<String> = Vec::new();
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    for (lineno, line) in nonempty_lines(&content) {
        let (item, styles) = split_tab(path, lineno, line)?;
        let names: Vec<String> = styles
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if names.is_empty() {
            return Err(ScrError::Data(format!(
                "{}:{lineno}: item '{item}' has no styles",
                path.display()
            )));
        }
        if catalog.index_of(item).is_none() {
            stats.dropped_labels += 1;
            continue;
        }
        for n in &names {
            if !vocab.contains(n) {
                vocab.push(n.clone());
            }
        }
        rows.push((item.to_string(), names));
    }
    let labels = rows
        .iter()
        .map(|(_, names)| vocab.iter().map(|v| names.contains(v)).collect())
        .collect();
    StyleLabelMatrix::new(rows.into_iter().map(|(id, _)| id).collect(), vocab, labels)
}

/// Reads a ground-truth preference file. Returns the style-name order the
/// columns follow (from the `#styles` header), user ids, and the matrix.
pub fn load_truth(path: &Path) -> Result<(Vec<String>, Vec<String>, Tensor2<Real>)> {
    let content = std::fs::read_to_string(path)?;
    let mut styles = Vec::new();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in nonempty_lines(&content) {
        if let Some(rest) = line.strip_prefix("#styles\t") {
            styles = rest.split(',').map(str::to_string).collect();
            continue;
        }
        let (id, rest) = split_tab(path, lineno, line)?;
        let values: Vec<Real> = rest
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| {
                    ScrError::Data(format!("{}:{lineno}: bad number '{v}'", path.display()))
                })
            })
            .collect::<Result<_>>()?;
        ids.push(id.to_string());
        rows.push(values);
    }
    Ok((styles, ids, Tensor2::from_rows(&rows)?))
}

pub fn write_clicks(path: &Path, clicks: &ClickMatrix) -> Result<()> {
    let mut out = String::new();
    for u in 0..clicks.n_users() {
        for &i in clicks.user_items(u) {
            writeln!(out, "{}\t{}", clicks.user_id(u), clicks.item_id(i)).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_embeddings(path: &Path, table: &ItemEmbeddingTable) -> Result<()> {
    let mut out = String::new();
    for (i, id) in table.item_ids().iter().enumerate() {
        let values: Vec<String> = table.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{id}\t{}", values.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &StyleLabelMatrix, catalog_order: &[String]) -> Result<()> {
    let mut out = String::new();
    for id in catalog_order {
        if let Some(row) = labels.styles_for(id) {
            let names: Vec<&str> = labels
                .style_names()
                .iter()
                .zip(row)
                .filter(|(_, &b)| b)
                .map(|(n, _)| n.as_str())
                .collect();
            writeln!(out, "{id}\t{}", names.join("|")).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_truth(
    path: &Path,
    style_names: &[String],
    user_ids: &[String],
    truth: &Tensor2<Real>,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "#styles\t{}", style_names.join(",")).unwrap();
    for (u, id) in user_ids.iter().enumerate() {
        let values: Vec<String> = truth.row(u).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{id}\t{}", values.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn nonempty_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn split_tab<'a>(path: &Path, lineno: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    line.split_once('\t').ok_or_else(|| {
        ScrError::Data(format!(
            "{}:{lineno}: expected two tab-separated fields",
            path.display()
        ))
    })
}
