use multiscale_core::coeff::{parse_ratfunc, RatFunc, Rational, Sign, SignParams};
use multiscale_core::compat::{check_eps7, check_eps9, verdict, Stage, Verdict};
use multiscale_core::diffalg::{mono, parse, DiffPoly};
use multiscale_core::pipeline::{reduce, render_relation, ModelKind, PipelineError};

fn rf(s: &str) -> RatFunc {
    parse_ratfunc(s).unwrap()
}

fn signs(c: i64) -> SignParams {
    SignParams::with_c(if c > 0 { Sign::Plus } else { Sign::Minus })
}

fn c_times(c: i64, f: &str) -> RatFunc {
    &RatFunc::from_int(c) * &rf(f)
}

fn to_f64(q: &Rational) -> f64 {
    q.numer().to_string().parse::<f64>().unwrap() / q.denom().to_string().parse::<f64>().unwrap()
}

/// Bogoliubov branch of the lattice linearized about `f = e^{−iσt}` at
/// `σ = 1`: `ω² = Ω(Ω + 2)`, `Ω = s(1 − cos qh)/h²` with `s = 1` (DNLS) or
/// `s = 1 − h²` (AL), and `q` measured in slow units.
fn omega(kind: ModelKind, q: f64, h: f64) -> f64 {
    let (s, scale) = match kind {
        ModelKind::Dnls => (1.0, 1.0),
        ModelKind::Al => (1.0 - h * h, (1.0 - h * h).sqrt()),
    };
    let k = q / scale;
    let w = 2.0 * s * (k * h / 2.0).sin().powi(2) / (h * h);
    (w * (w + 2.0)).sqrt()
}

#[test]
fn dispersion_matches_the_linearized_lattice() {
    for kind in [ModelKind::Dnls, ModelKind::Al] {
        let rs = reduce(kind, 5, SignParams::default()).unwrap();
        for h0 in [(1, 5), (1, 3), (1, 2), (2, 3)] {
            let h = h0.0 as f64 / h0.1 as f64;
            let a = to_f64(
                &rs.a()
                    .eval_at(&Rational::new(h0.0.into(), h0.1.into()))
                    .unwrap(),
            );
            // Richardson on (ω/q − 1)/q² to cancel the q² error term.
            let est = |q: f64| (omega(kind, q, h) / q - 1.0) / (q * q);
            let q = 1e-2;
            let fit = (4.0 * est(q / 2.0) - est(q)) / 3.0;
            assert!((fit - a).abs() < 1e-6, "{kind} h={h}: {fit} vs {a}");
            // The group velocity is one in slow units.
            assert!((omega(kind, 1e-3, h) / 1e-3 - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn eps2_relation() {
    for c in [1, -1] {
        let rs = reduce(ModelKind::Dnls, 5, signs(c)).unwrap();
        assert_eq!(
            render_relation(1, rs.eps2_relation()),
            "nu1 = (-1)*phi1_t1^1"
        );
    }
}

#[test]
fn speed_and_sign_configuration() {
    for c in [1, -1] {
        let rs = reduce(ModelKind::Dnls, 5, signs(c)).unwrap();
        assert_eq!(rs.c, RatFunc::from_int(c));
        assert_eq!(rs.zeta_sq, rf("h^2"));
    }
    for kind in [ModelKind::Dnls, ModelKind::Al] {
        let defocusing = SignParams {
            sigma: Sign::Minus,
            c_sign: Sign::Plus,
        };
        assert!(matches!(
            reduce(kind, 5, defocusing),
            Err(PipelineError::ImaginarySpeed(_))
        ));
    }
}

#[test]
fn potential_kdv_coefficients() {
    for c in [1, -1] {
        let rs = reduce(ModelKind::Dnls, 5, signs(c)).unwrap();
        assert_eq!(rs.a(), &c_times(c, "(3-h^2)/24"));
        let k2 = rs.flows.flow(2).unwrap();
        // a[∂³ϕ − (3/4a)(∂ϕ)²]
        let expected = parse(&format!("({})*D3[phi,1]+(-3/4)*D1[phi,1]^2", rs.a())).unwrap();
        assert_eq!(k2, &expected);
    }
}

#[test]
fn eps7_rhs_before_absorption() {
    for c in [1, -1] {
        let rs = reduce(ModelKind::Dnls, 7, signs(c)).unwrap();
        let rhs = rs.phi2_rhs.as_ref().unwrap();
        let expected = [
            (mono(&[(1, 2, 2)]), rf("-(5*h^2-7)/64")),
            (mono(&[(1, 1, 3)]), c_times(c, "h^2/12")),
            (mono(&[(1, 1, 1), (1, 3, 1)]), rf("-(3*h^2+1)/16")),
            (mono(&[(1, 5, 1)]), c_times(c, "-(h^4-30*h^2-15)/1920")),
        ];
        assert_eq!(rhs.len(), 4);
        for (m, coeff) in &expected {
            assert_eq!(&rhs.coeff(m), coeff, "c={c} {m:?}");
        }
        assert_eq!(rs.b(3), Some(&c_times(c, "-(h^4-30*h^2-15)/1920")));
        let f2 = rs.f2.as_ref().unwrap();
        assert_eq!(f2.len(), 3);
        assert!(f2.terms().all(|(m, _)| m.total_degree() >= 2));
    }
}

#[test]
fn eps7_stage_is_unconstrained() {
    for kind in [ModelKind::Dnls, ModelKind::Al] {
        let rs = reduce(kind, 7, SignParams::default()).unwrap();
        let r = check_eps7(&rs).unwrap();
        assert_eq!(r.stage, Stage::Eps7);
        assert_eq!(r.n_conditions, 0);
        assert_eq!(r.raw_conditions, 0);
        assert!(r.satisfied);
    }
}

#[test]
fn eps9_structure_dnls() {
    for c in [1, -1] {
        let rs = reduce(ModelKind::Dnls, 9, signs(c)).unwrap();
        let g2 = rs.g2.as_ref().unwrap();
        assert_eq!(g2.len(), 14);
        assert!(g2
            .terms()
            .all(|(m, _)| m.weight() == 9 && m.total_degree() >= 2));
        assert!(g2
            .terms()
            .any(|(m, _)| m.factors().iter().any(|(v, _)| v.level == 2)));
        let r7 = check_eps7(&rs).unwrap();
        let r9 = check_eps9(&rs, &r7).unwrap();
        assert_eq!((r9.n_unknowns, r9.rank, r9.n_params), (31, 31, 14));
        assert_eq!(r9.n_conditions, 5);
        assert_eq!(r9.n_free, 9);
        assert!(!r9.satisfied);
        assert_eq!(
            r9.constraints.iter().filter(|v| v.as_str() != "0").count(),
            1
        );
    }
}

#[test]
fn verdicts() {
    let d = verdict(ModelKind::Dnls, 9, SignParams::default()).unwrap();
    assert_eq!(d.verdict, Verdict::Obstructed);
    let a = verdict(ModelKind::Al, 9, SignParams::default()).unwrap();
    assert_eq!(a.verdict, Verdict::IntegrableConsistent);
    assert_eq!(a.reports.len(), 2);
    let r9 = &a.reports[1];
    assert_eq!((r9.n_unknowns, r9.n_conditions, r9.n_free), (31, 5, 9));
    assert_eq!(a.reduced.g2.as_ref().map(DiffPoly::len), Some(14));
    assert!(r9.resolved.is_some());
}

#[test]
fn al_coefficients_reduce_to_dnls_in_the_continuum() {
    let al = reduce(ModelKind::Al, 9, SignParams::default()).unwrap();
    let dnls = reduce(ModelKind::Dnls, 9, SignParams::default()).unwrap();
    let zero = Rational::from_integer(0.into());
    for m in 2..=4 {
        let x = al.b(m).unwrap().eval_at(&zero).unwrap();
        let y = dnls.b(m).unwrap().eval_at(&zero).unwrap();
        assert_eq!(x, y, "b{m}");
    }
    assert_eq!(
        al.kdv.e.eval_at(&zero).unwrap(),
        Rational::new((-3).into(), 4.into())
    );
}
