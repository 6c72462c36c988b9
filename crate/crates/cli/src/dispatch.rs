//! Maps a measure name onto the library call that evaluates it.

use polyent::measures::{self, MeasureKind};
use polyent::qstate::{Bipartition, State};
use polyent::roofopt;
use polyent::{BoundDirection, OptimizerConfig};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub measure: &'static str,
    pub cut: String,
    pub value: f64,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_direction: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Outcome {
    pub fn to_csv(&self) -> String {
        format!(
            "measure,cut,value,exact,bound_direction,converged,seed,restarts,max_iterations\n\
             {},\"{}\",{:?},{},{},{},{},{},{}\n",
            self.measure,
            self.cut,
            self.value,
            self.exact,
            self.bound_direction.unwrap_or(""),
            self.converged.map(|c| c.to_string()).unwrap_or_default(),
            self.seed,
            self.restarts,
            self.max_iterations
        )
    }
}

pub fn measure(kind: MeasureKind, state: &State, cut: Option<&str>, cfg: &OptimizerConfig) -> Result<Outcome, String> {
    let n = state.dims().len();
    let cut_text = cut.unwrap_or("0:");
    let cut = Bipartition::parse(cut_text, n).map_err(|e| format!("--cut {cut_text}: {e}"))?;
    let flag = |e: polyent::Error| format!("--measure {} on dims [{}]: {e}", kind.as_str(), state.dims());
    let rho = || state.to_density();

    let closed = |value: f64| (value, true, None);
    let (value, exact, opt): (f64, bool, Option<roofopt::OptResult>) = match kind {
        MeasureKind::Entropy => closed(measures::von_neumann_entropy(
            &rho().partial_trace(cut.side_a()).map_err(flag)?,
        )),
        MeasureKind::MutualInfo => closed(measures::mutual_information_cut(&rho(), &cut).map_err(flag)?),
        MeasureKind::Tangle => match state.as_pure() {
            Some(psi) => closed(measures::tangle_pure_cut(&psi, &cut).map_err(flag)?),
            None => closed(measures::tangle_2q(&rho()).map_err(flag)?),
        },
        MeasureKind::Concurrence => closed(measures::concurrence_2q(&rho()).map_err(flag)?),
        MeasureKind::ConcurrenceAssist => {
            closed(measures::concurrence_of_assistance_2q(&rho()).map_err(flag)?)
        }
        MeasureKind::Eof => {
            let r = roofopt::minimize_roof(&rho(), &cut, cfg).map_err(flag)?;
            (r.value, r.exact, Some(r))
        }
        MeasureKind::Eoa => {
            let r = roofopt::maximize_roof(&rho(), &cut, cfg).map_err(flag)?;
            (r.value, r.exact, Some(r))
        }
        MeasureKind::TangleAssist => {
            let r = roofopt::tangle_of_assistance_2q(&rho(), cfg).map_err(flag)?;
            (r.value, r.exact, Some(r))
        }
        MeasureKind::Ue => {
            if n == 2 && cut.side_a() != [0] {
                return Err(format!(
                    "--cut {cut_text}: ue measures subsystem 1, so the cut must be 0:1"
                ));
            }
            let r = roofopt::unlocalizable_entanglement(&rho(), cfg).map_err(flag)?;
            (r.value, r.exact, Some(r))
        }
    };
    let direction = opt.as_ref().map(|r| match r.bound_direction {
        BoundDirection::LowerBoundOfTrue => "lower",
        BoundDirection::UpperBoundOfTrue => "upper",
    });
    Ok(Outcome {
        measure: kind.as_str(),
        cut: cut.to_string(),
        value,
        exact,
        bound_direction: direction,
        converged: opt.as_ref().map(|r| r.converged),
        seed: cfg.seed,
        restarts: cfg.restarts,
        max_iterations: cfg.max_iterations,
    })
}
