//! Fixtures shared by the benchmarks.

use midclass_core::panel_analysis::{build_five_year_panel, FiveYearTable};
use midclass_core::pareto::sample_societies;
use midclass_core::synthetic::{attach_democracy, synthetic_panel, DemocracyDgp, SyntheticPanelConfig};
use midclass_core::{CovariateKey, CrossSection, InequalityKind, MonteCarloConfig, QuantileInterval};

/// Seeded Monte Carlo sample of `n` societies.
pub fn monte_carlo(n: usize) -> CrossSection {
    let societies = sample_societies(&MonteCarloConfig {
        n_societies: n,
        ..MonteCarloConfig::default()
    })
    .expect("valid config");
    CrossSection::from_societies("bench", &societies).expect("valid societies")
}

/// Annual synthetic panel pooled into one cross-section, about
/// `countries * 41` units.
pub fn panel_cross_section(countries: usize) -> CrossSection {
    let panel = synthetic_panel(&SyntheticPanelConfig {
        n_countries: countries,
        ..SyntheticPanelConfig::default()
    })
    .expect("valid config");
    panel.cross_section("bench", InequalityKind::Gini).expect("non-empty panel")
}

/// Five-year table with a planted (48,98) democracy effect.
pub fn democracy_table(countries: usize) -> FiveYearTable {
    let annual = synthetic_panel(&SyntheticPanelConfig {
        n_countries: countries,
        year_step: 5,
        ..SyntheticPanelConfig::default()
    })
    .expect("valid config");
    let iv = QuantileInterval::new(48, 98).expect("valid interval");
    let dgp = DemocracyDgp::planted(CovariateKey::VdemPolyarchy, 1980, iv, 2.0);
    let panel = attach_democracy(&annual, &dgp, 1).expect("continuous key");
    build_five_year_panel(&panel, 1980, 2020).expect("span of ten years or more")
}
