use serde::{Deserialize, Serialize};

use super::maze::{random_maze_spec, suite_grids, MazeSpec, SUITE_NOISE};
use super::{generate_1id, generate_maze, OneIdSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::InfluenceDiagram;

/// What to generate for each seed of a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CorpusTemplate {
    /// 1-ID(n) diagrams.
    OneId { n: usize, b: f64 },
    /// Random `width x height` mazes; instance `i` uses `noise[i % len]`.
    Maze {
        width: usize,
        height: usize,
        stages: usize,
        noise: Vec<f64>,
    },
    /// The shipped layouts crossed with the shipped noise levels, layout-major.
    MazeSuite { stages: usize },
}

impl CorpusTemplate {
    pub fn family(&self) -> &'static str {
        match self {
            CorpusTemplate::OneId { .. } => "1-ID",
            CorpusTemplate::Maze { .. } | CorpusTemplate::MazeSuite { .. } => "maze",
        }
    }

    fn check(&self, count: usize) -> Result<()> {
        match self {
            CorpusTemplate::OneId { n, b } => {
                if *n == 0 || !(0.0..=1.0).contains(b) {
                    return Err(Error::Invalid(format!("1-ID template needs n >= 1 and b in [0, 1] (n = {n}, b = {b})")));
                }
            }
            CorpusTemplate::Maze { width, height, stages, noise } => {
                if *width == 0 || *height == 0 || *stages == 0 || noise.is_empty() {
                    return Err(Error::Invalid("maze template needs a nonempty grid, stages and noise levels".into()));
                }
            }
            CorpusTemplate::MazeSuite { stages } => {
                let size = suite_grids().len() * SUITE_NOISE.len();
                if *stages == 0 || count > size {
                    return Err(Error::Invalid(format!("maze suite has {size} problems and needs stages >= 1")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ProblemSpec {
    #[serde(rename = "1-ID")]
    OneId(OneIdSpec),
    #[serde(rename = "maze")]
    Maze(MazeSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub seed: u64,
    /// File name relative to the manifest.
    pub path: String,
    pub spec: ProblemSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub template: CorpusTemplate,
    pub base_seed: u64,
    pub count: usize,
    pub entries: Vec<CorpusEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub manifest: Manifest,
    pub diagrams: Vec<InfluenceDiagram>,
}

/// `count` problems with seeds `base_seed, base_seed + 1, ...`.
pub fn generate_corpus(name: &str, template: &CorpusTemplate, count: usize, base_seed: u64, exec: Execution) -> Result<Corpus> {
    template.check(count)?;
    let suite = match template {
        CorpusTemplate::MazeSuite { .. } => suite_grids(),
        _ => Vec::new(),
    };
    let entries: Vec<CorpusEntry> = (0..count)
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let (id, spec) = match template {
                CorpusTemplate::OneId { n, b } => (
                    format!("{name}-{i:04}"),
                    ProblemSpec::OneId(OneIdSpec { n: *n, b: *b, seed }),
                ),
                CorpusTemplate::Maze { width, height, stages, noise } => (
                    format!("{name}-{i:04}"),
                    ProblemSpec::Maze(random_maze_spec(*width, *height, *stages, noise[i % noise.len()], seed)),
                ),
                CorpusTemplate::MazeSuite { stages } => {
                    let (layout, grid) = &suite[i / SUITE_NOISE.len()];
                    let agent = i % SUITE_NOISE.len();
                    let spec = MazeSpec {
                        seed,
                        ..MazeSpec::new(grid.clone(), *stages, SUITE_NOISE[agent])
                    };
                    (format!("{name}-{layout}-agent{}", agent + 1), ProblemSpec::Maze(spec))
                }
            };
            CorpusEntry { path: format!("{id}.json"), id, seed, spec }
        })
        .collect();
    let diagrams = exec
        .map(&entries, |e| match &e.spec {
            ProblemSpec::OneId(s) => Ok(generate_1id(s)),
            ProblemSpec::Maze(s) => generate_maze(s),
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        manifest: Manifest {
            name: name.to_string(),
            template: template.clone(),
            base_seed,
            count,
            entries,
        },
        diagrams,
    })
}
