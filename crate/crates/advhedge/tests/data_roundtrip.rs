use advhedge::data::{load_series, write_series};
use advhedge_core::backtest::MarketSeries;
use chrono::{Days, NaiveDate};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_identity(
        gaps in prop::collection::vec(1u64..5, 2..60),
        closes in prop::collection::vec(1e-6f64..1e6, 60),
    ) {
        let mut d = NaiveDate::from_ymd_opt(2001, 3, 1).unwrap();
        let mut dates = Vec::new();
        for g in &gaps {
            d = d.checked_add_days(Days::new(*g)).unwrap();
            dates.push(d.format("%Y-%m-%d").to_string());
        }
        let obs = dates.into_iter().zip(closes.iter().copied()).collect();
        let series = MarketSeries::new("SYM", obs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("SYM.csv");
        write_series(&p, &series).unwrap();
        let back = load_series(&p, 1).unwrap();
        prop_assert_eq!(back, series);
    }
}
