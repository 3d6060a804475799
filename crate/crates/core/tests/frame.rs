use hemisel::frame::SurveyFrame;
use hemisel::selection::{simulate_threshold, OutcomeModel, Propensity, ScalarLaw, ThresholdModelSpec};
use hemisel::table::Table;
use hemisel::Error;
use proptest::prelude::*;

fn with_cells(n: usize) -> SurveyFrame {
    let spec = ThresholdModelSpec {
        propensity: Propensity::Logistic { intercept: 0.0, slopes: vec![1.0] },
        copula_rho: 0.0,
        outcome: OutcomeModel::Linear { beta: vec![0.0, 1.0], sigma: 1.0 },
        z_laws: vec![ScalarLaw::standard_normal()],
        x_laws: vec![ScalarLaw::Uniform { lo: 0.0, hi: 1.0 }],
    };
    let mut f = simulate_threshold(&spec, n, 5).unwrap().to_frame(true);
    let cells: Vec<[f64; 1]> = f.x.rows().map(|r| [f64::from(u8::from(r[0] < 0.4))]).collect();
    f.x = Table::from_rows(1, &cells);
    f
}

#[test]
fn x_cell_keeps_matching_units_in_order() {
    let f = with_cells(500);
    let cell = f.x_cell(0, 1.0).unwrap();
    let expect: Vec<String> = (0..f.len()).filter(|&i| f.x.row(i)[0] == 1.0).map(|i| f.ids[i].clone()).collect();
    assert_eq!(cell.ids, expect);
    assert!(cell.x.rows().all(|r| r[0] == 1.0));
    assert_eq!(cell.latents.len(), f.latents.len());
    assert_eq!(f.x_cell(0, 0.0).unwrap().len() + cell.len(), f.len());
    cell.validate().unwrap();
}

#[test]
fn x_cell_errors() {
    let f = with_cells(50);
    assert!(matches!(f.x_cell(1, 1.0), Err(Error::Precondition(_))));
    let err = f.x_cell(0, 7.0).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));
    assert!(err.to_string().contains("x_1 = 7"), "{err}");
}

#[test]
fn simulated_frame_round_trips_through_csv() {
    let f = with_cells(200);
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("id,y,r,weight,z_1,x_1,latent_y_full"));
    assert_eq!(SurveyFrame::read_csv(buf.as_slice()).unwrap(), f);
    let plain = f.select(&(0..f.len()).collect::<Vec<_>>());
    assert_eq!(plain, f);
}

#[test]
fn validate_rejects_inconsistent_records() {
    let mut f = with_cells(10);
    let i = f.r.iter().position(|&r| r == 1).unwrap();
    f.y[i] = None;
    assert!(matches!(f.validate(), Err(Error::Data(_))));
    let mut g = with_cells(10);
    g.weight[0] = 0.0;
    assert!(g.validate().unwrap_err().to_string().contains("record 1"));
}

proptest! {
    #[test]
    fn csv_round_trip_preserves_every_bit(
        rows in prop::collection::vec((any::<bool>(), -1e6f64..1e6, 1e-3f64..1e3, prop::array::uniform2(any::<f64>().prop_filter("finite", |v| v.is_finite()))), 1..30)
    ) {
        let n = rows.len();
        let f = SurveyFrame {
            ids: (0..n).map(|i| format!("u{i}")).collect(),
            y: rows.iter().map(|r| r.0.then_some(r.1)).collect(),
            r: rows.iter().map(|r| u8::from(r.0)).collect(),
            weight: rows.iter().map(|r| r.2).collect(),
            z: Table::from_rows(1, &rows.iter().map(|r| [r.3[0]]).collect::<Vec<_>>()),
            x: Table::from_rows(1, &rows.iter().map(|r| [r.3[1]]).collect::<Vec<_>>()),
            latents: vec![],
        };
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        prop_assert_eq!(SurveyFrame::read_csv(buf.as_slice()).unwrap(), f);
    }
}
