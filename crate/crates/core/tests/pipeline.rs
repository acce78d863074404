use rbflux::flux::conservation_defect;
use rbflux::problem::ProblemDescriptor;
use rbflux::rb::{greedy, FullOrderContext, GreedyOptions, ReducedModel, Termination};

fn context(cells: usize) -> FullOrderContext {
    let problem = ProblemDescriptor::thermal_block(cells, 100.0).build().unwrap();
    FullOrderContext::new(problem).unwrap()
}

fn relative_error(ctx: &FullOrderContext, model: &ReducedModel, mu: &[f64]) -> f64 {
    let c = model.rom_solve(mu).unwrap();
    let un = model.lift_solution(&c).unwrap();
    let u = ctx.solve(mu).unwrap();
    let diff: Vec<f64> = u
        .coefficients()
        .iter()
        .zip(un.coefficients())
        .map(|(a, b)| a - b)
        .collect();
    let diff = rbflux::dg::DGFunction::from_coefficients(u.mesh().clone(), diff).unwrap();
    ctx.v_norm(&diff) / ctx.v_norm(&u)
}

#[test]
fn trained_model_survives_a_file_roundtrip() {
    let ctx = context(4);
    let train = ctx.problem().parameter_box().sample_uniform(40, 3);
    let options = GreedyOptions {
        tolerance: 1e-3,
        ..GreedyOptions::default()
    };
    let (model, termination) = greedy(&ctx, &train, &options).unwrap();
    assert_eq!(termination, Termination::Converged);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = ReducedModel::load(&path).unwrap();
    assert_eq!(loaded.n(), model.n());
    assert_eq!(loaded.m(), model.m());

    for mu in ctx.problem().parameter_box().sample_uniform(5, 8) {
        let (c, eta) = model.solve_and_estimate(&mu).unwrap();
        let (c2, eta2) = loaded.solve_and_estimate(&mu).unwrap();
        assert_eq!(c, c2);
        assert_eq!(eta.to_bits(), eta2.to_bits());
        let (d, _) = model.reduced_flux(&mu, &c).unwrap();
        let (d2, flux) = loaded.reduced_flux(&mu, &c2).unwrap();
        assert_eq!(d, d2);
        let report = conservation_defect(&flux, &ctx.problem().source());
        assert!(report.relative_max() <= 1e-10, "{}", report.relative_max());
    }
}

#[test]
fn training_on_a_single_parameter_gives_one_basis_vector() {
    let ctx = context(4);
    let mu = vec![0.5, 2.0, 4.0, 0.2];
    let (model, termination) = greedy(&ctx, &[mu.clone()], &GreedyOptions::default()).unwrap();
    assert_eq!(termination, Termination::Converged);
    assert_eq!(model.n(), 1);
    assert_eq!(model.m(), 1);
    assert!(relative_error(&ctx, &model, &mu) < 1e-10);
    let c = model.rom_solve(&mu).unwrap();
    let (_, flux) = model.reduced_flux(&mu, &c).unwrap();
    let t = ctx.reconstruct(&ctx.solve(&mu).unwrap(), &mu).unwrap();
    let scale = t.dofs().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for (a, b) in flux.dofs().iter().zip(t.dofs()) {
        assert!((a - b).abs() <= 1e-9 * scale);
    }
}

#[test]
fn errors_shrink_as_the_basis_grows() {
    let ctx = context(4);
    let train = ctx.problem().parameter_box().sample_uniform(60, 5);
    let options = GreedyOptions {
        tolerance: 1e-5,
        ..GreedyOptions::default()
    };
    let (model, _) = greedy(&ctx, &train, &options).unwrap();
    assert!(model.n() >= 4);
    let test = ctx.problem().parameter_box().sample_uniform(8, 12);
    let worst = |m: &ReducedModel| {
        test.iter()
            .map(|mu| relative_error(&ctx, m, mu))
            .fold(0.0f64, f64::max)
    };
    let small = model.truncated(2).unwrap();
    assert!(worst(&model) < worst(&small));
}
