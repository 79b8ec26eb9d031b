use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;

use geovista_core::eval::{verify_levels, ChatVerifier, LevelVerifier};
use geovista_core::protocol::Trajectory;
use geovista_core::{hierarchical_reward, LevelVerdicts, RewardGroup, RewardRung};

use super::eval::check_alignment;
use super::{index_by_id, load_manifest, trajectories_path};
use crate::config::RunConfig;
use crate::output::{header, read_records, write_json, write_jsonl};

pub const REWARDS: &str = "rewards.jsonl";
pub const SUMMARY: &str = "reward_summary.json";

#[derive(Debug, Serialize)]
struct RewardRow<'a> {
    group: usize,
    sample_id: &'a str,
    member: usize,
    rung: &'static str,
    reward: f64,
    advantage: f64,
    verdicts: LevelVerdicts,
}

#[derive(Debug, Serialize)]
struct GroupStats<'a> {
    group: usize,
    sample_id: &'a str,
    size: usize,
    mean_reward: f64,
    rung_fractions: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    beta: f64,
    trajectories: usize,
    mean_reward: f64,
    rung_fractions: BTreeMap<&'static str, f64>,
    groups: Vec<GroupStats<'a>>,
}

/// Splits the log into groups: fixed-size chunks when `group_size` is given,
/// otherwise all trajectories of a sample in first-appearance order. Returns
/// indices into `trajectories`.
pub fn group_indices(trajectories: &[Trajectory], group_size: Option<usize>) -> Result<Vec<Vec<usize>>> {
    match group_size {
        Some(0) => bail!("group size must be at least 1"),
        Some(g) => {
            if !trajectories.len().is_multiple_of(g) {
                bail!("{} trajectories do not split into groups of {g}", trajectories.len());
            }
            let groups: Vec<Vec<usize>> = (0..trajectories.len()).collect::<Vec<_>>().chunks(g).map(<[usize]>::to_vec).collect();
            let mixed: Vec<String> = groups
                .iter()
                .enumerate()
                .filter(|(_, idx)| idx.iter().any(|&i| trajectories[i].sample_id != trajectories[idx[0]].sample_id))
                .map(|(n, idx)| {
                    let ids: Vec<&str> = idx.iter().map(|&i| trajectories[i].sample_id.as_str()).collect();
                    format!("group {n}: [{}]", ids.join(", "))
                })
                .collect();
            if !mixed.is_empty() {
                bail!("groups mix sample ids:\n  {}", mixed.join("\n  "));
            }
            Ok(groups)
        }
        None => {
            let mut order: Vec<&str> = Vec::new();
            let mut by_id: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, t) in trajectories.iter().enumerate() {
                let slot = by_id.entry(&t.sample_id).or_default();
                if slot.is_empty() {
                    order.push(&t.sample_id);
                }
                slot.push(i);
            }
            Ok(order.into_iter().map(|id| by_id.remove(id).unwrap_or_default()).collect())
        }
    }
}

fn fractions(rungs: impl Iterator<Item = RewardRung>, n: usize) -> BTreeMap<&'static str, f64> {
    let mut counts: BTreeMap<&'static str, usize> = RewardRung::ALL.iter().map(|r| (r.as_str(), 0)).collect();
    for r in rungs {
        *counts.entry(r.as_str()).or_default() += 1;
    }
    counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}

pub fn run(config: &RunConfig, limit: Option<usize>, log_path: Option<&Path>, group_size: Option<usize>) -> Result<()> {
    let (entries, _) = load_manifest(config, limit)?;
    let path = trajectories_path(config, log_path);
    let (_, trajectories): (_, Vec<Trajectory>) = read_records(&path)?;
    if trajectories.is_empty() {
        bail!("trajectory log {} is empty", path.display());
    }
    let ids: Vec<&str> = entries.iter().map(|e| e.sample_id.as_str()).collect();
    check_alignment(&trajectories, &ids, false)?;
    let groups = group_indices(&trajectories, group_size)?;

    let by_id = index_by_id(&entries);
    let verifier: Option<ChatVerifier> = match &config.verifier {
        Some(m) => Some(ChatVerifier::new(m.client()?)),
        None => None,
    };
    let verdicts: Vec<LevelVerdicts> = trajectories
        .iter()
        .map(|t| -> Result<LevelVerdicts> {
            let Some(answer) = t.final_answer.as_deref() else { return Ok(LevelVerdicts::none()) };
            let label = by_id[t.sample_id.as_str()].label()?;
            let v = verify_levels(&t.sample_id, answer, &label, verifier.as_ref().map(|v| v as &dyn LevelVerifier));
            for flag in &v.flags {
                log::warn!("{}: {flag}", t.sample_id);
            }
            Ok(v.verdicts)
        })
        .collect::<Result<_>>()?;
    let rewards = verdicts
        .iter()
        .map(|v| hierarchical_reward(v, config.beta))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(trajectories.len());
    let mut stats = Vec::with_capacity(groups.len());
    for (g, idx) in groups.iter().enumerate() {
        let sample_id = trajectories[idx[0]].sample_id.as_str();
        let group = RewardGroup::from_rewards(sample_id, idx.iter().map(|&i| rewards[i].value()).collect())?;
        for (member, (&i, &advantage)) in idx.iter().zip(group.advantages()).enumerate() {
            rows.push(RewardRow {
                group: g,
                sample_id,
                member,
                rung: rewards[i].rung().as_str(),
                reward: rewards[i].value(),
                advantage,
                verdicts: verdicts[i],
            });
        }
        stats.push(GroupStats {
            group: g,
            sample_id,
            size: group.group_size(),
            mean_reward: group.mean_reward(),
            rung_fractions: fractions(idx.iter().map(|&i| rewards[i].rung()), idx.len()),
        });
    }
    let n = trajectories.len();
    let summary = Summary {
        beta: config.beta,
        trajectories: n,
        mean_reward: rewards.iter().map(|r| r.value()).sum::<f64>() / n as f64,
        rung_fractions: fractions(rewards.iter().map(|r| r.rung()), n),
        groups: stats,
    };
    write_jsonl(&config.paths.out.join(REWARDS), &header("rewards", config), &rows)?;
    write_json(&config.paths.out.join(SUMMARY), &header("reward_summary", config), &summary)?;
    println!("{} trajectories in {} groups, mean reward {:.4}", n, groups.len(), summary.mean_reward);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(ids: &[&str]) -> Vec<Trajectory> {
        ids.iter().map(|id| Trajectory::new(*id)).collect()
    }

    #[test]
    fn fixed_size_groups() {
        let t = log(&["a", "a", "b", "b"]);
        assert_eq!(group_indices(&t, Some(2)).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert!(group_indices(&t, Some(3)).is_err());
        let mixed = log(&["a", "b", "b", "b"]);
        let err = group_indices(&mixed, Some(2)).unwrap_err().to_string();
        assert!(err.contains("group 0: [a, b]"));
    }

    #[test]
    fn groups_by_sample_id() {
        let t = log(&["b", "a", "b", "c"]);
        assert_eq!(group_indices(&t, None).unwrap(), vec![vec![0, 2], vec![1], vec![3]]);
    }
}
