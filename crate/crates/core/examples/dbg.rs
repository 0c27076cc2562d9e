use casimir_lowt::scalar::{Mode, Scalar};
use casimir_lowt::bessel::sph_bessel_point_derivatives;
use casimir_lowt::series::compose_shifted_sqrt;

fn main() {
    let w = Scalar::one(Mode::Floating);
    let l = 1i64;
    let (s_derivs, _) = sph_bessel_point_derivatives(l, &w, 8).unwrap();
    println!("s_l derivs at w=1: {:?}", s_derivs.iter().map(|v| v.to_f64()).collect::<Vec<_>>());
    // expect s_1(1)=0.36788? cosh1 - sinh1 = 0.3679; s_1'(1)= s_0(1) - s_1(1) = 1.1752-0.3679 = 0.8073
    let su = compose_shifted_sqrt(&s_derivs[..6], &w, &Scalar::one(Mode::Floating)).unwrap();
    let spu = compose_shifted_sqrt(&s_derivs[1..7], &w, &Scalar::one(Mode::Floating)).unwrap();
    println!("Su: offset2={} coeffs={:?}", su.offset2(), su.coeffs().iter().take(6).map(|v| v.to_f64()).collect::<Vec<_>>());
    println!("S'u: offset2={} coeffs={:?}", spu.offset2(), spu.coeffs().iter().take(6).map(|v| v.to_f64()).collect::<Vec<_>>());
    // Su x^2 coefficient should be s'(1)/2 = 0.4036
    let d = casimir_lowt::scattering::d_series_plasma(l, casimir_lowt::Polarization::Tm, &w, 8).unwrap();
    println!("TM plasma d: offset2={} rel_coeffs(c3,c4,c5)={:?}", d.offset2(),
        d.coeffs().iter().take(3).map(|v| v.to_f64()).collect::<Vec<_>>());
    println!("c5/c3 expect = -0.3 - 1.5*s'/(w s) = {}", -0.3 - 1.5*0.80731/0.36788);
    let cond = casimir_lowt::scattering::d_series_tm_conductor(l, 8).unwrap();
    println!("TM conductor: c5/c3 = {}", cond.coeffs()[2].to_f64()/cond.coeffs()[0].to_f64());
}
