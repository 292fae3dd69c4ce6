use thiserror::Error;

use super::{Configuration, FeatureKind, FeatureModel, GroupType};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumerateError {
    #[error("model has {count} valid configurations, more than the cap of {cap}")]
    Overflow { count: u128, cap: usize },
}

/// Number of valid configurations (selections only, no bindings),
/// saturating at `u128::MAX`.
pub fn count_configurations(model: &FeatureModel) -> u128 {
    count(model, 0)
}

fn count(model: &FeatureModel, idx: usize) -> u128 {
    let node = &model.indexed()[idx];
    let kids = node.children.iter().map(|&c| (c, count(model, c)));
    match node.group {
        GroupType::None => kids.fold(1u128, |acc, (c, n)| {
            let factor = if model.indexed()[c].kind == FeatureKind::Mandatory {
                n
            } else {
                n.saturating_add(1)
            };
            acc.saturating_mul(factor)
        }),
        GroupType::Alternative => kids.fold(0u128, |acc, (_, n)| acc.saturating_add(n)),
        GroupType::Or => kids
            .fold(1u128, |acc, (_, n)| acc.saturating_mul(n.saturating_add(1)))
            .saturating_sub(1),
    }
}

/// Every valid selection of the model, in a deterministic order. Fails
/// without materializing anything when there are more than `cap`.
pub fn enumerate(model: &FeatureModel, cap: usize) -> Result<Vec<Configuration>, EnumerateError> {
    let total = count_configurations(model);
    if total > cap as u128 {
        return Err(EnumerateError::Overflow { count: total, cap });
    }
    Ok(options(model, 0)
        .into_iter()
        .map(|sel| {
            Configuration::new(
                model.version(),
                sel.into_iter().map(|i| model.id_at(i).to_string()),
            )
        })
        .collect())
}

/// Selections of the subtree rooted at `idx`, given that `idx` is selected.
fn options(model: &FeatureModel, idx: usize) -> Vec<Vec<usize>> {
    let node = &model.indexed()[idx];
    // One "choice list" per independent decision under this node.
    let mut choices: Vec<Vec<Vec<usize>>> = Vec::new();
    match node.group {
        GroupType::None => {
            for &c in &node.children {
                let mut opts = options(model, c);
                if model.indexed()[c].kind == FeatureKind::Optional {
                    opts.insert(0, Vec::new());
                }
                choices.push(opts);
            }
        }
        GroupType::Alternative => {
            choices.push(
                node.children
                    .iter()
                    .flat_map(|&c| options(model, c))
                    .collect(),
            );
        }
        GroupType::Or => {
            let per_child: Vec<Vec<Vec<usize>>> = node
                .children
                .iter()
                .map(|&c| {
                    let mut opts = options(model, c);
                    opts.insert(0, Vec::new());
                    opts
                })
                .collect();
            let mut combined = product(&per_child);
            // The first combination picks the empty option everywhere.
            combined.remove(0);
            choices.push(combined);
        }
    }
    product(&choices)
        .into_iter()
        .map(|mut sel| {
            sel.insert(0, idx);
            sel
        })
        .collect()
}

fn product(choices: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
    for opts in choices {
        let mut next = Vec::with_capacity(acc.len() * opts.len());
        for prefix in &acc {
            for o in opts {
                let mut s = prefix.clone();
                s.extend_from_slice(o);
                next.push(s);
            }
        }
        acc = next;
    }
    acc
}
