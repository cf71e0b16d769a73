use gsqg_core::nonuniqueness::{verify_residual, GolovkinSystem, MANIFEST_FILE};
use gsqg_core::operator::ShiftConvention;
use gsqg_core::radial::build_grid;
use gsqg_core::spectra::{full_spectrum, FamilyId, LinearizedProblem, VortexFamily};

#[test]
fn saved_system_reproduces_lambda_and_residual() {
    let g0 = build_grid(0, 64, 30.0).unwrap();
    let vortex = VortexFamily::standard(FamilyId::GaussRing).generate(&[0.1], &g0, 0.0).unwrap();
    let g = build_grid(2, 64, 30.0).unwrap();
    let m = LinearizedProblem::new(vortex.clone(), 2, 2.0, ShiftConvention::Definition).assemble(&g, 1e-3).unwrap();
    let pair = full_spectrum(&m).unwrap().swap_remove(0);
    let sys = GolovkinSystem::build(2.0, 1e-3, &vortex, 2, &pair, ShiftConvention::Definition).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sys.save(dir.path(), Some("abc")).unwrap();
    let (back, manifest) = GolovkinSystem::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert!((back.lambda - sys.lambda).norm() < 1e-14);
    assert_eq!(back.n, 2);
    assert_eq!(manifest.force.len(), sys.force.len());
    let before = verify_residual(&sys, &[-3.0, 0.0], &[1.0, -1.0]).unwrap().max_relative;
    let after = verify_residual(&back, &[-3.0, 0.0], &[1.0, -1.0]).unwrap().max_relative;
    assert!(before < 1e-8 && after < 1e-8, "{before:e} {after:e}");
}
