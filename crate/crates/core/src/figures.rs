//! The figure set as data: model specs, sampling layouts, CSV
//! renderers and matching plot scripts.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::config::{ModelKind, ModelSpec};
use crate::error::Result;
use crate::io::{csv_string, diagonal_csv, fmt_f64};
use crate::map::ProcessTensor;
use crate::models::{self, Detector};
use crate::transfer::{
    radial_form, radial_form_kraus, radial_profile, radial_profile_kraus, RadialGrid, RadialKernel,
};

/// Sampling requested for one figure.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    Diagonal,
    Radial { theta: Vec<f64>, r_min: f64, r_max: f64, n: usize },
    /// Profiles along `r' − r` at `r + r' = sum`; one column per model.
    Profile { theta: f64, sum: f64, half_width: f64, n: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub id: &'static str,
    pub title: &'static str,
    /// Profile figures carry an experimental and an ideal model, in that order.
    pub models: Vec<ModelSpec>,
    pub layout: Layout,
}

fn amp(mu: f64, delta: f64, sigma: f64, detector: Detector) -> ModelSpec {
    ModelSpec {
        r: Some(models::DEFAULT_R),
        mu: Some(mu),
        delta: Some(delta),
        sigma: Some(sigma),
        detector: Some(detector),
        ..ModelSpec::new(ModelKind::Amplifier)
    }
}

fn add(chi: f64, gamma: f64, mu: f64, detector: Detector, n_max: usize) -> ModelSpec {
    ModelSpec {
        chi: Some(chi),
        gamma: Some(gamma),
        mu: Some(mu),
        detector: Some(detector),
        n_max: Some(n_max),
        ..ModelSpec::new(ModelKind::Addition)
    }
}

pub const FIG8_N_MAX: usize = 80;

/// Amplifier presets for the four diagonal panels, `fig3a` to `fig3d`.
pub fn amplifier_presets() -> [ModelSpec; 4] {
    let (mu, d, s) = (models::REALISTIC_MU, models::REALISTIC_DELTA, models::REALISTIC_SIGMA);
    [
        amp(1.0, 2.0, 1.0, Detector::PhotonCounter),
        amp(mu, 2.0, 1.0, Detector::Apd),
        amp(1.0, d, s, Detector::PhotonCounter),
        amp(mu, d, s, Detector::Apd),
    ]
}

fn radial_theta() -> Vec<f64> {
    vec![0.0, FRAC_PI_2, PI]
}

pub fn catalog() -> Vec<Figure> {
    let [a, b, c, d] = amplifier_presets();
    let (chi, gamma, mu) = (models::REALISTIC_CHI, models::REALISTIC_GAMMA, models::REALISTIC_MU);
    let opa = |n| add(chi, 0.0, 1.0, Detector::PhotonCounter, n);
    let full = |n| add(chi, gamma, mu, Detector::Apd, n);
    let diag = |id, title, m: ModelSpec| Figure { id, title, models: vec![m], layout: Layout::Diagonal };
    let ideal_add = ModelSpec { n_max: Some(8), ..ModelSpec::new(ModelKind::IdealAddition) };
    let amp_radial = Layout::Radial { theta: radial_theta(), r_min: 0.0, r_max: 4.0, n: 41 };
    let add_radial = Layout::Radial { theta: vec![0.0], r_min: 0.0, r_max: 5.0, n: 51 };
    let profile = |sum: f64, half_width| Layout::Profile { theta: 0.0, sum, half_width, n: 201 };
    vec![
        diag("fig3a", "amplifier, ideal photon and counter", a),
        diag("fig3b", "amplifier, APD mu=0.11, delta=2", b.clone()),
        diag("fig3c", "amplifier, counter, delta=1.089", c),
        diag("fig3d", "amplifier, APD mu=0.11, delta=1.089", d.clone()),
        Figure { id: "fig4a", title: "amplifier kernel, APD mu=0.11, delta=2", models: vec![b], layout: amp_radial.clone() },
        Figure { id: "fig4b", title: "amplifier kernel, APD mu=0.11, delta=1.089", models: vec![d], layout: amp_radial },
        diag("fig6a", "ideal photon addition", ideal_add),
        diag("fig6b", "addition, OPA chi=0.105, counter", opa(8)),
        diag("fig6c", "addition, parasite gamma=0.425, chi=0.01", add(0.01, gamma, mu, Detector::Apd, 8)),
        diag("fig6d", "addition, full model", full(8)),
        Figure { id: "fig7a", title: "addition kernel, OPA chi=0.105, counter", models: vec![opa(15)], layout: add_radial.clone() },
        Figure { id: "fig7b", title: "addition kernel, gamma=0.425, APD", models: vec![full(15)], layout: add_radial },
        Figure {
            id: "fig8a",
            title: "addition profile, r+r'=2",
            models: vec![full(FIG8_N_MAX), opa(FIG8_N_MAX)],
            layout: profile(2.0, 2.0),
        },
        Figure {
            id: "fig8b",
            title: "addition profile, r+r'=20",
            models: vec![full(FIG8_N_MAX), opa(FIG8_N_MAX)],
            layout: profile(20.0, 4.0),
        },
    ]
}

pub fn by_id(id: &str) -> Option<Figure> {
    catalog().into_iter().find(|f| f.id == id)
}

/// Result of rendering one figure.
#[derive(Clone, Debug)]
pub enum Rendered {
    Diagonal { tensor: ProcessTensor, csv: String },
    Radial { kernel: RadialKernel, csv: String },
    Profile { columns: Vec<Vec<(f64, f64)>>, csv: String },
}

impl Rendered {
    pub fn csv(&self) -> &str {
        match self {
            Rendered::Diagonal { csv, .. } | Rendered::Radial { csv, .. } | Rendered::Profile { csv, .. } => csv,
        }
    }
}

pub fn radial_grid(theta: &[f64], r_min: f64, r_max: f64, n: usize) -> RadialGrid {
    let rs: Vec<f64> = (0..n).map(|i| r_min + (r_max - r_min) * i as f64 / (n - 1).max(1) as f64).collect();
    RadialGrid { r_prime: rs.clone(), r: rs, theta: theta.to_vec() }
}

/// Radial kernel of a model; additions go through their Kraus operators.
pub fn model_radial(spec: &ModelSpec, grid: &RadialGrid) -> Result<RadialKernel> {
    if spec.model == ModelKind::Addition {
        return radial_form_kraus(&models::addition_model_kraus(&spec.addition_config()?)?, grid);
    }
    radial_form(&spec.build()?, grid)
}

pub fn model_profile(spec: &ModelSpec, theta: f64, sum: f64, half_width: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if spec.model == ModelKind::Addition {
        let k = models::addition_model_kraus(&spec.addition_config()?)?;
        return radial_profile_kraus(&k, theta, sum, half_width, n);
    }
    radial_profile(&spec.build()?, theta, sum, half_width, n)
}

pub fn profile_csv(names: &[&str], columns: &[Vec<(f64, f64)>]) -> String {
    let mut header = vec!["r_prime_minus_r"];
    header.extend_from_slice(names);
    let n = columns.first().map_or(0, |c| c.len());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![fmt_f64(columns[0][i].0)];
            row.extend(columns.iter().map(|c| fmt_f64(c[i].1)));
            row
        })
        .collect();
    csv_string(&header, &rows)
}

pub fn render(fig: &Figure) -> Result<Rendered> {
    match &fig.layout {
        Layout::Diagonal => {
            let tensor = fig.models[0].build()?;
            let csv = diagonal_csv(&tensor);
            Ok(Rendered::Diagonal { tensor, csv })
        }
        Layout::Radial { theta, r_min, r_max, n } => {
            let kernel = model_radial(&fig.models[0], &radial_grid(theta, *r_min, *r_max, *n))?;
            let csv = kernel.to_csv();
            Ok(Rendered::Radial { kernel, csv })
        }
        Layout::Profile { theta, sum, half_width, n } => {
            let columns =
                fig.models.iter().map(|m| model_profile(m, *theta, *sum, *half_width, *n)).collect::<Result<Vec<_>>>()?;
            let names = if columns.len() == 2 { vec!["experimental", "ideal"] } else { vec!["value"] };
            let csv = profile_csv(&names, &columns);
            Ok(Rendered::Profile { columns, csv })
        }
    }
}

/// Matplotlib script that plots `csv_name` from its own directory.
pub fn plot_script(layout: &Layout, csv_name: &str, title: &str) -> String {
    let body = match layout {
        Layout::Diagonal => {
            "d = np.genfromtxt(path, delimiter=\",\", names=True)\n\
             n = int(d[\"m\"].max()) + 1\n\
             z = np.zeros((n, n))\n\
             z[d[\"m\"].astype(int), d[\"k\"].astype(int)] = d[\"value\"]\n\
             ax = plt.figure().add_subplot(projection=\"3d\")\n\
             m, k = np.meshgrid(np.arange(n), np.arange(n), indexing=\"ij\")\n\
             ax.bar3d(m.ravel(), k.ravel(), 0, 0.6, 0.6, z.ravel())\n\
             ax.set_xlabel(\"m\")\n\
             ax.set_ylabel(\"k\")\n"
        }
        Layout::Radial { .. } => {
            "d = np.genfromtxt(path, delimiter=\",\", names=True)\n\
             for th in np.unique(d[\"theta\"]):\n\
             \x20   s = d[d[\"theta\"] == th]\n\
             \x20   rp, r = np.unique(s[\"r_prime\"]), np.unique(s[\"r\"])\n\
             \x20   v = s[\"value\"].reshape(len(r), len(rp))\n\
             \x20   plt.figure()\n\
             \x20   plt.contourf(rp, r, v, 30, cmap=\"RdBu_r\")\n\
             \x20   plt.colorbar()\n\
             \x20   plt.xlabel(\"r'\")\n\
             \x20   plt.ylabel(\"r\")\n\
             \x20   plt.title(f\"theta = {th:.3f}\")\n"
        }
        Layout::Profile { .. } => {
            "d = np.genfromtxt(path, delimiter=\",\", names=True)\n\
             styles = {\"experimental\": \"-\", \"ideal\": \"--\", \"value\": \"-\"}\n\
             for name in d.dtype.names[1:]:\n\
             \x20   plt.plot(d[\"r_prime_minus_r\"], d[name], styles.get(name, \"-\"), label=name)\n\
             plt.xlabel(\"r' - r\")\n\
             plt.legend()\n"
        }
    };
    format!(
        "import os\nimport numpy as np\nimport matplotlib.pyplot as plt\n\n\
         path = os.path.join(os.path.dirname(os.path.abspath(__file__)), \"{csv_name}\")\n{body}\
         plt.suptitle(\"{title}\")\nplt.show()\n"
    )
}

/// Command-line arguments that reproduce `fig` with the `cvmaps` binary,
/// excluding `--config` and `--out`.
pub fn cli_args(fig: &Figure) -> Vec<String> {
    let list = |v: &[f64]| v.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(",");
    match &fig.layout {
        Layout::Diagonal => vec!["tensor".into()],
        Layout::Radial { theta, r_min, r_max, n } => vec![
            "kernel".into(),
            "--theta".into(),
            list(theta),
            "--grid".into(),
            format!("{},{},{n}", fmt_f64(*r_min), fmt_f64(*r_max)),
        ],
        Layout::Profile { theta, sum, half_width, n } => vec![
            "kernel".into(),
            "--theta".into(),
            fmt_f64(*theta),
            "--profile".into(),
            format!("{},{},{n}", fmt_f64(*sum), fmt_f64(*half_width)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique() {
        let c = catalog();
        let mut ids: Vec<_> = c.iter().map(|f| f.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), c.len());
    }

    #[test]
    fn profile_csv_layout() {
        let s = profile_csv(&["a", "b"], &[vec![(-1.0, 0.5), (1.0, 0.25)], vec![(-1.0, 2.0), (1.0, 3.0)]]);
        assert_eq!(s, "r_prime_minus_r,a,b\n-1,0.5,2\n1,0.25,3\n");
    }

    #[test]
    fn fig3a_suppresses_higher_orders() {
        let r = render(&by_id("fig3a").unwrap()).unwrap();
        let Rendered::Diagonal { tensor, .. } = r else { panic!() };
        let d = tensor.diagonal();
        assert!(d.iter().all(|row| row.iter().skip(2).all(|v| *v == 0.0)));
    }
}
