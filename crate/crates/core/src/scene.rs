//! Scene files: the JSON document the command line reads and writes.
//!
//! Gamma entries are keyed `"k,j,i"` (1-based, `∂_k` component of
//! `∇_{∂i} ∂j`), omega entries `"i,j"` with `i < j`. Absent entries are zero.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cotangent::{CotangentChart, DEFAULT_FIBER_DOMAIN};
use crate::error::{parse_expr, Error, Result};
use crate::expr::Expr;
use crate::geometry::{Chart, ConnectionCoeffs};
use crate::presymplectic::{PresymplecticStructure, SplittingS};
use crate::reduction::ScalingTranslationScene;
use crate::sampling::DEFAULT_SEED;
use crate::symplectic::{FormKind, TwoFormField};

pub type Entries = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub chart: ChartSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_form: Option<TwoFormSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cotangent: Option<CotangentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presymplectic: Option<PresymplecticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub coords: Vec<String>,
    pub domain: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    #[serde(default)]
    pub gamma: Entries,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSpec {
    #[default]
    General,
    Symplectic,
    Presymplectic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoFormSpec {
    #[serde(default)]
    pub omega: Entries,
    #[serde(default)]
    pub kind: KindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

/// With this block, `chart` is the base of `T*` and `base_connection`
/// lives on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CotangentSpec {
    pub base_connection: ConnectionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_domain: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    pub n: usize,
    pub h: usize,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingSpec {
    pub transverse: Vec<usize>,
    pub leaf: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresymplecticSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SplittingSpec>,
    #[serde(rename = "K", default)]
    pub k: Entries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Replaces the tolerance of every residual check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        SceneFile::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct CotangentScene {
    pub cc: CotangentChart,
    pub base_connection: ConnectionCoeffs,
}

#[derive(Debug, Clone)]
pub struct PresymplecticScene {
    pub structure: PresymplecticStructure,
    pub splitting: SplittingS,
    pub k: ConnectionCoeffs,
}

/// A validated scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub chart: Chart,
    pub connection: Option<ConnectionCoeffs>,
    pub two_form: Option<TwoFormField>,
    pub cotangent: Option<CotangentScene>,
    pub reduction: Option<ScalingTranslationScene>,
    pub presymplectic: Option<PresymplecticScene>,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scene(msg.into())
}

fn domain_pairs(d: &[[f64; 2]]) -> Vec<(f64, f64)> {
    d.iter().map(|[a, b]| (*a, *b)).collect()
}

fn parse_key(key: &str, arity: usize, dim: usize, what: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != arity {
        return Err(bad(format!("{what} key `{key}` needs {arity} comma-separated indices")));
    }
    parts
        .iter()
        .map(|p| {
            let i: usize = p
                .parse()
                .map_err(|_| bad(format!("{what} key `{key}`: `{p}` is not an index")))?;
            if i == 0 || i > dim {
                return Err(bad(format!("{what} key `{key}`: index {i} outside 1..={dim}")));
            }
            Ok(i - 1)
        })
        .collect()
}

fn parse_on(chart: &Chart, src: &str, context: &str) -> Result<Expr> {
    let e = parse_expr(src)?;
    chart.check_vars(&e, context)?;
    Ok(e)
}

pub fn connection_from_entries(chart: &Chart, gamma: &Entries, what: &str) -> Result<ConnectionCoeffs> {
    let n = chart.dim();
    let mut table = BTreeMap::new();
    for (key, src) in gamma {
        let idx = parse_key(key, 3, n, what)?;
        let e = parse_on(chart, src, &format!("{what} entry {key}"))?;
        if table.insert((idx[0], idx[1], idx[2]), e).is_some() {
            return Err(bad(format!("{what} entry {key} given twice")));
        }
    }
    ConnectionCoeffs::from_fn(chart, |k, j, i| table.get(&(k, j, i)).cloned().unwrap_or_else(Expr::zero))
}

pub fn connection_entries(conn: &ConnectionCoeffs) -> Entries {
    let n = conn.dim();
    let mut out = Entries::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let e = conn.get(k, j, i);
                if !e.is_zero() {
                    out.insert(format!("{},{},{}", k + 1, j + 1, i + 1), e.to_string());
                }
            }
        }
    }
    out
}

fn form_from_entries(chart: &Chart, omega: &Entries) -> Result<TwoFormField> {
    let n = chart.dim();
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (key, src) in omega {
        let idx = parse_key(key, 2, n, "omega")?;
        if idx[0] >= idx[1] {
            return Err(bad(format!("omega key `{key}` must have i < j")));
        }
        if !seen.insert((idx[0], idx[1])) {
            return Err(bad(format!("omega entry {key} given twice")));
        }
        entries.push((idx[0], idx[1], parse_on(chart, src, &format!("omega entry {key}"))?));
    }
    TwoFormField::from_entries(chart, &entries)
}

pub fn form_spec(omega: &TwoFormField) -> TwoFormSpec {
    let n = omega.dim();
    let mut entries = Entries::new();
    for i in 0..n {
        for j in i + 1..n {
            let e = omega.get(i, j);
            if !e.is_zero() {
                entries.insert(format!("{},{}", i + 1, j + 1), e.to_string());
            }
        }
    }
    let (kind, rank) = match omega.kind() {
        FormKind::General => (KindSpec::General, None),
        FormKind::Symplectic => (KindSpec::Symplectic, None),
        FormKind::Presymplectic { rank } => (KindSpec::Presymplectic, Some(rank)),
    };
    TwoFormSpec {
        omega: entries,
        kind,
        rank,
    }
}

pub fn chart_spec(chart: &Chart) -> ChartSpec {
    ChartSpec {
        coords: chart.coords().to_vec(),
        domain: chart.domain().iter().map(|&(a, b)| [a, b]).collect(),
    }
}

impl Scene {
    /// Working points for checks: the chart's deterministic sample set for
    /// this scene's seed.
    pub fn sample_points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        chart.sample_points(self.seed)
    }

    pub fn from_file(file: &SceneFile) -> Result<Scene> {
        let chart = Chart::new(file.chart.coords.clone(), domain_pairs(&file.chart.domain))?;
        let seed = file.seed.unwrap_or(DEFAULT_SEED);
        let tolerance = file.tolerances.as_ref().and_then(|t| t.residual);
        if let Some(t) = tolerance {
            if !(t.is_finite() && t > 0.0) {
                return Err(bad(format!("residual tolerance must be positive, got {t}")));
            }
        }
        let points = chart.sample_points(seed);

        let connection = file
            .connection
            .as_ref()
            .map(|c| connection_from_entries(&chart, &c.gamma, "gamma"))
            .transpose()?;

        let two_form = match &file.two_form {
            None => None,
            Some(block) => {
                let w = form_from_entries(&chart, &block.omega)?;
                Some(match block.kind {
                    KindSpec::General => {
                        if block.rank.is_some() {
                            return Err(bad("rank is only meaningful for a presymplectic form"));
                        }
                        w
                    }
                    KindSpec::Symplectic => {
                        if block.rank.is_some_and(|r| r != chart.dim()) {
                            return Err(bad("a symplectic form has full rank"));
                        }
                        w.into_symplectic(&points)?
                    }
                    KindSpec::Presymplectic => {
                        let rank = block.rank.ok_or_else(|| bad("presymplectic form needs a rank"))?;
                        w.into_presymplectic(rank, &points)?
                    }
                })
            }
        };

        let cotangent = match &file.cotangent {
            None => None,
            Some(block) => {
                if connection.is_some() || two_form.is_some() {
                    return Err(bad(
                        "with a cotangent block the chart is the base: connection and two_form are derived, not given",
                    ));
                }
                let base_connection = connection_from_entries(&chart, &block.base_connection.gamma, "base gamma")?;
                let fiber = match &block.fiber_domain {
                    Some(d) => domain_pairs(d),
                    None => vec![DEFAULT_FIBER_DOMAIN; chart.dim()],
                };
                Some(CotangentScene {
                    cc: CotangentChart::with_fiber_domain(&chart, fiber)?,
                    base_connection,
                })
            }
        };

        let reduction = match &file.reduction {
            None => None,
            Some(block) => {
                let cc = match &cotangent {
                    Some(c) => c.cc.clone(),
                    None => {
                        if two_form.is_some() {
                            return Err(bad("a reduction scene uses the canonical form; omit two_form"));
                        }
                        if chart.dim() != 2 * block.n {
                            return Err(bad(format!(
                                "reduction with n = {} needs a chart of {} coordinates (x then y1..yn), got {}",
                                block.n,
                                2 * block.n,
                                chart.dim()
                            )));
                        }
                        let base = Chart::new(chart.coords()[..block.n].to_vec(), chart.domain()[..block.n].to_vec())?;
                        let cc = CotangentChart::with_fiber_domain(&base, chart.domain()[block.n..].to_vec())?;
                        if cc.total().coords() != chart.coords() {
                            return Err(bad(format!(
                                "fiber coordinates must be named {:?}",
                                &cc.total().coords()[block.n..]
                            )));
                        }
                        cc
                    }
                };
                if cc.n() != block.n {
                    return Err(bad(format!("reduction n = {} but the base has {} coordinates", block.n, cc.n())));
                }
                Some(ScalingTranslationScene::with_chart(cc, block.h, block.xi.clone())?)
            }
        };

        let presymplectic = match &file.presymplectic {
            None => None,
            Some(block) => {
                if cotangent.is_some() || reduction.is_some() {
                    return Err(bad("a presymplectic block cannot be combined with cotangent or reduction"));
                }
                let w = two_form.clone().ok_or_else(|| bad("a presymplectic block needs two_form"))?;
                let structure = PresymplecticStructure::new(w, block.p)?;
                if let Some(n) = block.n {
                    if n != structure.n() {
                        return Err(bad(format!(
                            "presymplectic n = {n} but the chart splits as 2·{} + {}",
                            structure.n(),
                            block.p
                        )));
                    }
                }
                let splitting = match &block.splitting {
                    None => SplittingS::adapted(&structure),
                    Some(sp) => {
                        let to0 = |v: &[usize]| -> Result<Vec<usize>> {
                            v.iter()
                                .map(|&i| {
                                    if i == 0 || i > chart.dim() {
                                        Err(bad(format!("splitting index {i} outside 1..={}", chart.dim())))
                                    } else {
                                        Ok(i - 1)
                                    }
                                })
                                .collect()
                        };
                        let s = SplittingS::new(&structure, to0(&sp.transverse)?, to0(&sp.leaf)?)?;
                        if s.leaf != SplittingS::adapted(&structure).leaf {
                            return Err(bad("the leaf block must be the kernel coordinates"));
                        }
                        s
                    }
                };
                let k = connection_from_entries(&chart, &block.k, "K")?;
                Some(PresymplecticScene {
                    structure,
                    splitting,
                    k,
                })
            }
        };

        Ok(Scene {
            chart,
            connection,
            two_form,
            cotangent,
            reduction,
            presymplectic,
            seed,
            tolerance,
        })
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        Scene::from_file(&SceneFile::from_json(text)?)
    }

    pub fn read(path: &Path) -> Result<Scene> {
        Scene::from_file(&SceneFile::read(path)?)
    }

    /// A scene holding just a connection and a form on one chart.
    pub fn plain(chart: &Chart, connection: Option<ConnectionCoeffs>, two_form: Option<TwoFormField>, seed: u64) -> Scene {
        Scene {
            chart: chart.clone(),
            connection,
            two_form,
            cotangent: None,
            reduction: None,
            presymplectic: None,
            seed,
            tolerance: None,
        }
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            chart: chart_spec(&self.chart),
            connection: self.connection.as_ref().map(|c| ConnectionSpec {
                gamma: connection_entries(c),
            }),
            two_form: self.two_form.as_ref().map(form_spec),
            cotangent: self.cotangent.as_ref().map(|c| CotangentSpec {
                base_connection: ConnectionSpec {
                    gamma: connection_entries(&c.base_connection),
                },
                fiber_domain: Some(c.cc.total().domain()[c.cc.n()..].iter().map(|&(a, b)| [a, b]).collect()),
            }),
            reduction: self.reduction.as_ref().map(|r| ReductionSpec {
                n: r.n(),
                h: r.h,
                xi: r.xi.clone(),
            }),
            presymplectic: self.presymplectic.as_ref().map(|p| PresymplecticSpec {
                n: Some(p.structure.n()),
                p: p.structure.p(),
                splitting: None,
                k: connection_entries(&p.k),
            }),
            seed: Some(self.seed),
            tolerances: self.tolerance.map(|t| Tolerances { residual: Some(t) }),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }
}
