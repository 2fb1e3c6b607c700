//! Signed linear combinations of loss terms, center-bias regularization,
//! and the named presets (Table-style row ids plus LC 1 / LC 2).

use crate::error::{Error, Result};
use crate::loss::distribution::{self, FocalParams, KlDirection, WbceParams};
use crate::loss::perceptual::{self, FeatureExtractor};
use crate::loss::pixel::{self, SigWeightParams};
use crate::loss::saliency::{self, NssMode};
use crate::loss::LossResult;
use crate::map::{FixationSet, SaliencyMap};
use crate::scalar::{eps_floor, lit, Real};

/// How the per-pixel center-bias residuals are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean over pixels; α keeps a resolution-independent meaning.
    #[default]
    Mean,
    Sum,
}

/// Center-bias regularizer: B map plus strength α.
#[derive(Debug, Clone)]
pub struct CenterBias<T> {
    pub map: SaliencyMap<T>,
    pub alpha: T,
    pub aggregation: Aggregation,
}

impl<T: Real> CenterBias<T> {
    pub fn new(map: SaliencyMap<T>, alpha: T) -> Result<Self> {
        if alpha < T::zero() {
            return Err(Error::BadParameter("alpha must be >= 0".into()));
        }
        Ok(Self {
            map,
            alpha,
            aggregation: Aggregation::Mean,
        })
    }
}

/// Pixelwise mean of a non-empty, uniformly sized stack of maps.
pub fn center_bias_from_maps<T: Real>(maps: &[SaliencyMap<T>]) -> Result<SaliencyMap<T>> {
    let first = maps.first().ok_or(Error::EmptyInput("center-bias map list"))?;
    let mut acc = vec![T::zero(); first.len()];
    for m in maps {
        first.same_dims(m)?;
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += *v;
        }
    }
    let n = lit::<T>(maps.len() as f64);
    SaliencyMap::new(
        first.width(),
        first.height(),
        acc.into_iter().map(|v| v / n).collect(),
    )
}

/// α-weighted squared deviation from the bias map.
pub fn center_bias_term<T: Real>(
    pred: &SaliencyMap<T>,
    cb: &CenterBias<T>,
) -> Result<LossResult<T>> {
    pred.same_dims(&cb.map)?;
    let denom = match cb.aggregation {
        Aggregation::Mean => lit::<T>(pred.len() as f64),
        Aggregation::Sum => T::one(),
    };
    let two = lit::<T>(2.0);
    let mut value = T::zero();
    let mut gradient = Vec::with_capacity(pred.len());
    for (p, b) in pred.values().iter().zip(cb.map.values()) {
        let d = *p - *b;
        value += cb.alpha * d * d;
        gradient.push(two * cb.alpha * d / denom);
    }
    Ok(LossResult::new(value / denom, gradient))
}

/// One paper functional, fully parameterized.
#[derive(Debug, Clone, PartialEq)]
pub enum TermKind<T> {
    Mse,
    Ead,
    Ae,
    WmseMlnet,
    WmseSig(SigWeightParams<T>),
    Kld(KlDirection),
    Bhat,
    Bce,
    Wbce(WbceParams<T>),
    Focal(FocalParams<T>),
    Nll,
    Nss(NssMode),
    Cc,
    Df,
    Gm,
    CenterBias { alpha: T, aggregation: Aggregation },
}

impl<T: Real> TermKind<T> {
    pub fn id(&self) -> &'static str {
        match self {
            TermKind::Mse => "mse",
            TermKind::Ead => "ead",
            TermKind::Ae => "ae",
            TermKind::WmseMlnet => "mlnet_mse",
            TermKind::WmseSig(_) => "sig_mse",
            TermKind::Kld(_) => "kld",
            TermKind::Bhat => "bhat",
            TermKind::Bce => "bce",
            TermKind::Wbce(_) => "wbce",
            TermKind::Focal(_) => "focal",
            TermKind::Nll => "nll",
            TermKind::Nss(_) => "nss",
            TermKind::Cc => "cc",
            TermKind::Df => "df",
            TermKind::Gm => "gm",
            TermKind::CenterBias { .. } => "center_bias",
        }
    }

    /// True for the terms defined on distributions; they are fed through
    /// floor-and-normalize with the chain rule applied to the gradient.
    fn needs_distribution(&self) -> bool {
        matches!(self, TermKind::Kld(_) | TermKind::Bhat | TermKind::Nll)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term<T> {
    pub kind: TermKind<T>,
    pub coeff: T,
}

/// External resources some terms need at evaluation time.
#[derive(Default)]
pub struct EvalResources<'a, T> {
    pub extractor: Option<&'a FeatureExtractor<T>>,
    pub center_bias: Option<&'a SaliencyMap<T>>,
}

impl<'a, T> EvalResources<'a, T> {
    pub fn none() -> Self {
        Self {
            extractor: None,
            center_bias: None,
        }
    }
}

/// Signed weighted sum of loss terms, evaluated term by term in fixed
/// order so results are bit-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCombination<T> {
    pub terms: Vec<Term<T>>,
}

impl<T: Real> LossCombination<T> {
    pub fn new(terms: Vec<Term<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyInput("loss combination terms"));
        }
        if terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(Error::BadParameter("non-finite coefficient".into()));
        }
        Ok(Self { terms })
    }

    pub fn single(kind: TermKind<T>) -> Self {
        Self {
            terms: vec![Term {
                kind,
                coeff: T::one(),
            }],
        }
    }

    /// True if any term needs a fixation set.
    pub fn needs_fixations(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t.kind, TermKind::Nll | TermKind::Nss(_)))
    }

    /// True if any term needs a feature extractor.
    pub fn needs_extractor(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t.kind, TermKind::Df | TermKind::Gm))
    }

    pub fn evaluate(
        &self,
        gt: &SaliencyMap<T>,
        pred: &SaliencyMap<T>,
        fix: Option<&FixationSet>,
        resources: &EvalResources<'_, T>,
    ) -> Result<LossResult<T>> {
        gt.same_dims(pred)?;
        let mut total = LossResult::zero(pred.len());

        // distribution views are shared across terms and built lazily
        let mut dists = None;
        let floor = eps_floor::<T>();

        for term in &self.terms {
            let raw = if term.kind.needs_distribution() {
                let (gt_dist, pred_dist, pred_total) = dists.get_or_insert_with(|| {
                    let t: T = pred.values().iter().map(|v| *v + floor).sum();
                    (gt.to_distribution(), pred.to_distribution(), t)
                });
                let mut r = match &term.kind {
                    TermKind::Kld(dir) => distribution::kld(gt_dist, pred_dist, *dir),
                    TermKind::Bhat => distribution::bhat(gt_dist, pred_dist),
                    TermKind::Nll => {
                        let fix = fix.ok_or_else(|| Error::MissingFixations("nll".into()))?;
                        distribution::nll(pred_dist, fix)
                    }
                    _ => unreachable!(),
                }
                .map_err(|e| e.in_term(term.kind.id()))?;
                // chain rule through p_i = (x_i + ε) / Σ(x_k + ε)
                let dot: T = r
                    .gradient
                    .iter()
                    .zip(pred_dist.values())
                    .map(|(g, p)| *g * *p)
                    .sum();
                for g in r.gradient.iter_mut() {
                    *g = (*g - dot) / *pred_total;
                }
                r
            } else {
                match &term.kind {
                    TermKind::Mse => pixel::mse(gt, pred),
                    TermKind::Ead => pixel::ead(gt, pred),
                    TermKind::Ae => pixel::ae(gt, pred),
                    TermKind::WmseMlnet => pixel::wmse_mlnet(gt, pred),
                    TermKind::WmseSig(p) => pixel::wmse_sig(gt, pred, *p),
                    TermKind::Bce => distribution::bce(gt, pred),
                    TermKind::Wbce(p) => distribution::wbce(gt, pred, *p),
                    TermKind::Focal(p) => distribution::focal(gt, pred, *p),
                    TermKind::Nss(mode) => {
                        let fix = fix.ok_or_else(|| Error::MissingFixations("nss".into()))?;
                        saliency::nss_score(pred, fix, *mode)
                    }
                    TermKind::Cc => saliency::cc_score(gt, pred),
                    TermKind::Df => {
                        let f = resources
                            .extractor
                            .ok_or_else(|| Error::MissingExtractor("df".into()))?;
                        perceptual::df_loss(gt, pred, f)
                    }
                    TermKind::Gm => {
                        let f = resources
                            .extractor
                            .ok_or_else(|| Error::MissingExtractor("gm".into()))?;
                        perceptual::gm_loss(gt, pred, f)
                    }
                    TermKind::CenterBias { alpha, aggregation } => {
                        let bias = resources.center_bias.ok_or(Error::MissingCenterBias)?;
                        let cb = CenterBias {
                            map: bias.clone(),
                            alpha: *alpha,
                            aggregation: *aggregation,
                        };
                        center_bias_term(pred, &cb)
                    }
                    _ => unreachable!(),
                }
                .map_err(|e| e.in_term(term.kind.id()))?
            };

            total.value += term.coeff * raw.value;
            for (acc, g) in total.gradient.iter_mut().zip(&raw.gradient) {
                *acc += term.coeff * *g;
            }
        }
        Ok(total)
    }

    /// Plain-text `[term.<n>]` spec serialization.
    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        for (i, term) in self.terms.iter().enumerate() {
            out.push_str(&format!("[term.{}]\n", i + 1));
            out.push_str(&format!("kind = {}\n", term.kind.id()));
            out.push_str(&format!(
                "coeff = {}\n",
                term.coeff.to_f64().expect("finite coeff")
            ));
            match &term.kind {
                TermKind::WmseSig(p) => {
                    out.push_str(&format!("lambda = {}\n", p.lambda.to_f64().unwrap()));
                }
                TermKind::Wbce(p) => {
                    out.push_str(&format!("w = {}\n", p.w.to_f64().unwrap()));
                }
                TermKind::Focal(p) => {
                    out.push_str(&format!("gamma = {}\n", p.gamma.to_f64().unwrap()));
                }
                TermKind::Kld(dir) => {
                    let s = match dir {
                        KlDirection::AsWritten => "as_written",
                        KlDirection::GroundTruthFirst => "ground_truth_first",
                    };
                    out.push_str(&format!("kl_direction = {s}\n"));
                }
                TermKind::Nss(mode) => {
                    let s = match mode {
                        NssMode::PaperSumOverNm => "paper_sum_over_nm",
                        NssMode::PerFixation => "per_fixation",
                    };
                    out.push_str(&format!("nss_mode = {s}\n"));
                }
                TermKind::CenterBias { alpha, .. } => {
                    out.push_str(&format!("alpha = {}\n", alpha.to_f64().unwrap()));
                }
                _ => {}
            }
            out.push('\n');
        }
        out
    }

    /// Parses the plain-text combination spec format.
    pub fn parse_spec(text: &str) -> Result<Self> {
        let mut sections: Vec<(usize, Vec<(String, String)>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let n = inner
                    .strip_prefix("term.")
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::ParseSpec(format!("line {}: bad section `{line}`", lineno + 1))
                    })?;
                sections.push((n, Vec::new()));
            } else if let Some((k, v)) = line.split_once('=') {
                let section = sections.last_mut().ok_or_else(|| {
                    Error::ParseSpec(format!("line {}: key outside a section", lineno + 1))
                })?;
                section
                    .1
                    .push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(Error::ParseSpec(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                )));
            }
        }
        sections.sort_by_key(|(n, _)| *n);

        let mut terms = Vec::new();
        for (n, kv) in &sections {
            let get = |key: &str| {
                kv.iter()
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
            };
            let parse_num = |key: &str, default: f64| -> Result<T> {
                match get(key) {
                    Some(v) => v.parse::<f64>().map(lit).map_err(|_| {
                        Error::ParseSpec(format!("term.{n}: bad number for `{key}`"))
                    }),
                    None => Ok(lit(default)),
                }
            };
            let kind_name = get("kind")
                .ok_or_else(|| Error::ParseSpec(format!("term.{n}: missing `kind`")))?;
            let kind = match kind_name {
                "mse" => TermKind::Mse,
                "ead" => TermKind::Ead,
                "ae" => TermKind::Ae,
                "mlnet_mse" => TermKind::WmseMlnet,
                "sig_mse" => TermKind::WmseSig(SigWeightParams::with_lambda(parse_num(
                    "lambda", 0.55,
                )?)?),
                "kld" => TermKind::Kld(match get("kl_direction") {
                    None | Some("as_written") => KlDirection::AsWritten,
                    Some("ground_truth_first") => KlDirection::GroundTruthFirst,
                    Some(other) => {
                        return Err(Error::ParseSpec(format!(
                            "term.{n}: unknown kl_direction `{other}`"
                        )))
                    }
                }),
                "bhat" => TermKind::Bhat,
                "bce" => TermKind::Bce,
                "wbce" => TermKind::Wbce(WbceParams::new(parse_num("w", 0.5)?)?),
                "focal" => TermKind::Focal(FocalParams::new(parse_num("gamma", 2.0)?)?),
                "nll" => TermKind::Nll,
                "nss" => TermKind::Nss(match get("nss_mode") {
                    None | Some("per_fixation") => NssMode::PerFixation,
                    Some("paper_sum_over_nm") => NssMode::PaperSumOverNm,
                    Some(other) => {
                        return Err(Error::ParseSpec(format!(
                            "term.{n}: unknown nss_mode `{other}`"
                        )))
                    }
                }),
                "cc" => TermKind::Cc,
                "df" => TermKind::Df,
                "gm" => TermKind::Gm,
                "center_bias" => TermKind::CenterBias {
                    alpha: parse_num("alpha", 0.1)?,
                    aggregation: Aggregation::Mean,
                },
                other => {
                    return Err(Error::ParseSpec(format!(
                        "term.{n}: unknown kind `{other}`"
                    )))
                }
            };
            terms.push(Term {
                kind,
                coeff: parse_num("coeff", 1.0)?,
            });
        }
        Self::new(terms)
    }
}

/// Builds the named presets: every single-loss row, the LC 1 / LC 2
/// combinations, and their +R variants.
pub fn preset<T: Real>(name: &str) -> Result<LossCombination<T>> {
    let normalized: String = name
        .to_ascii_uppercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();

    let one = T::one();
    let term = |kind: TermKind<T>, coeff: T| Term { kind, coeff };
    let sig = |lambda: f64| -> Result<TermKind<T>> {
        Ok(TermKind::WmseSig(SigWeightParams::with_lambda(lit(lambda))?))
    };
    let r_term = || term(
        TermKind::CenterBias {
            alpha: lit(0.1),
            aggregation: Aggregation::Mean,
        },
        one,
    );
    let lc1 = |out: &mut Vec<Term<T>>| {
        out.push(term(TermKind::Kld(KlDirection::AsWritten), lit(10.0)));
        out.push(term(TermKind::Cc, lit(-2.0)));
        out.push(term(TermKind::Nss(NssMode::PerFixation), lit(-1.0)));
    };

    let terms: Vec<Term<T>> = match normalized.as_str() {
        "MSE" => vec![term(TermKind::Mse, one)],
        "EAD" => vec![term(TermKind::Ead, one)],
        "AE" => vec![term(TermKind::Ae, one)],
        "MLNET-MSE" | "W-MSE" => vec![term(TermKind::WmseMlnet, one)],
        "SIG-MSE" | "SIG-MSE(0.55)" | "SIG-MSE(λ=0.55)" => vec![term(sig(0.55)?, one)],
        "SIG-MSE(0.25)" | "SIG-MSE(λ=0.25)" => vec![term(sig(0.25)?, one)],
        "SIG-MSE(0.75)" | "SIG-MSE(λ=0.75)" => vec![term(sig(0.75)?, one)],
        "BCE" => vec![term(TermKind::Bce, one)],
        "W-BCE" | "W-BCE(0.5)" => vec![term(TermKind::Wbce(WbceParams::new(lit(0.5))?), one)],
        "W-BCE(0.4)" => vec![term(TermKind::Wbce(WbceParams::new(lit(0.4))?), one)],
        "W-BCE(0.6)" => vec![term(TermKind::Wbce(WbceParams::new(lit(0.6))?), one)],
        "W-BCE(0.7)" => vec![term(TermKind::Wbce(WbceParams::new(lit(0.7))?), one)],
        "W-BCE(0.8)" => vec![term(TermKind::Wbce(WbceParams::new(lit(0.8))?), one)],
        "W-BCE(0.9)" => vec![term(TermKind::Wbce(WbceParams::new(lit(0.9))?), one)],
        "FOCAL" | "FOCALLOSS" | "FL" => vec![term(TermKind::Focal(FocalParams::default()), one)],
        "KLD" => vec![term(TermKind::Kld(KlDirection::AsWritten), one)],
        // BHAT is already negated inside the loss (similarity → loss), so
        // the standalone preset keeps coefficient +1.
        "BHAT" => vec![term(TermKind::Bhat, one)],
        "NLL" => vec![term(TermKind::Nll, one)],
        // raw scores are maximized; descent needs coefficient -1
        "CC" => vec![term(TermKind::Cc, -one)],
        "NSS" => vec![term(TermKind::Nss(NssMode::PerFixation), -one)],
        "DF" => vec![term(TermKind::Df, one)],
        "GM" => vec![term(TermKind::Gm, one)],
        "SIG-MSE+R" => vec![term(sig(0.55)?, one), r_term()],
        "LC1" | "KLD+CC+NSS" => {
            let mut t = Vec::new();
            lc1(&mut t);
            t
        }
        "LC1_R" | "LC1+R" | "KLD+CC+NSS+R" => {
            let mut t = Vec::new();
            lc1(&mut t);
            t.push(r_term());
            t
        }
        "KLD+CC+NSS+DF+GM" => {
            let mut t = Vec::new();
            lc1(&mut t);
            t.push(term(TermKind::Df, one));
            t.push(term(TermKind::Gm, one));
            t
        }
        "LC2" | "KLD+CC+NSS+DF+GM+SIG-MSE" => {
            let mut t = Vec::new();
            lc1(&mut t);
            t.push(term(TermKind::Df, one));
            t.push(term(TermKind::Gm, one));
            t.push(term(sig(0.55)?, one));
            t
        }
        "LC2_R" | "LC2+R" | "KLD+CC+NSS+DF+GM+SIG-MSE+R" => {
            let mut t = Vec::new();
            lc1(&mut t);
            t.push(term(TermKind::Df, one));
            t.push(term(TermKind::Gm, one));
            t.push(term(sig(0.55)?, one));
            t.push(r_term());
            t
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    LossCombination::new(terms)
}
