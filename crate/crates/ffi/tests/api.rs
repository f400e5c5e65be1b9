use std::ffi::{c_char, CStr, CString};
use std::ptr;

use bottcher_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        bottcher_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn germ1d_round_trip() {
    // f(z) = z² + z³
    let re = [0.0, 0.0, 1.0, 1.0];
    let im = [0.0; 4];
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(bottcher_germ1d_new(re.as_ptr(), im.as_ptr(), 4, &mut h), BottcherStatus::Ok);
        let (mut wr, mut wi) = (0.0, 0.0);
        assert_eq!(bottcher_germ1d_eval(h, 0.05, 0.0, &mut wr, &mut wi), BottcherStatus::Ok);
        // φ(f(z)) = φ(z)²
        let z = 0.05f64;
        let (mut fr, mut fi) = (0.0, 0.0);
        assert_eq!(bottcher_germ1d_eval(h, z * z + z * z * z, 0.0, &mut fr, &mut fi), BottcherStatus::Ok);
        assert!((fr - (wr * wr - wi * wi)).abs() < 1e-14 && fi.abs() < 1e-14);

        let mut len = 0;
        let (mut cr, mut ci) = ([0.0; 2], [0.0; 2]);
        assert_eq!(
            bottcher_germ1d_series(h, 6, cr.as_mut_ptr(), ci.as_mut_ptr(), 2, &mut len),
            BottcherStatus::BufferTooSmall
        );
        assert_eq!(len, 5);
        let (mut cr, mut ci) = ([0.0; 5], [0.0; 5]);
        assert_eq!(bottcher_germ1d_series(h, 6, cr.as_mut_ptr(), ci.as_mut_ptr(), 5, &mut len), BottcherStatus::Ok);
        assert!((cr[0] - 0.5).abs() < 1e-15);
        bottcher_germ1d_free(h);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut h = ptr::null_mut();
    unsafe {
        // linear germ: not superattracting
        let re = [0.0, 0.5];
        let im = [0.0; 2];
        let st = bottcher_germ1d_new(re.as_ptr(), im.as_ptr(), 2, &mut h);
        assert_ne!(st, BottcherStatus::Ok);
        assert!(!last_error().is_empty());
        assert!(h.is_null());

        assert_eq!(bottcher_germ1d_new(re.as_ptr(), im.as_ptr(), 2, ptr::null_mut()), BottcherStatus::NullPointer);
        assert_eq!(bottcher_green_dim(ptr::null()), 0);

        let bad = CString::new("1,2,,3").unwrap();
        let mut g = ptr::null_mut();
        let st = bottcher_green_new_chart(bad.as_ptr(), &mut g);
        assert!(matches!(st, BottcherStatus::Parse | BottcherStatus::InvalidArgument), "{st:?}");
        assert!(g.is_null());
        bottcher_germ1d_free(ptr::null_mut());
    }
}

#[test]
fn green_and_coordinate_on_chart_germ() {
    let part = CString::new("1,2,3|4").unwrap();
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(bottcher_green_new_chart(part.as_ptr(), &mut g), BottcherStatus::Ok);
        assert_eq!(bottcher_green_dim(g), 2);
        let (re, im) = ([0.01, -0.02], [0.0, 0.01]);
        let mut val = 0.0;
        assert_eq!(bottcher_green_eval(g, re.as_ptr(), im.as_ptr(), 2, &mut val), BottcherStatus::Ok);
        assert!(val.is_finite() && val < 0.0);
        assert_eq!(bottcher_green_eval(g, re.as_ptr(), im.as_ptr(), 1, &mut val), BottcherStatus::DimensionMismatch);
        let zero = [0.0, 0.0];
        assert_eq!(bottcher_green_eval(g, zero.as_ptr(), zero.as_ptr(), 2, &mut val), BottcherStatus::Ok);
        assert_eq!(val, f64::NEG_INFINITY);
        bottcher_green_free(g);

        let mut c = ptr::null_mut();
        assert_eq!(bottcher_coordinate_new_chart(part.as_ptr(), 4, &mut c), BottcherStatus::Ok);
        assert_eq!(bottcher_coordinate_dim(c), 2);
        let (mut or, mut oi) = ([0.0; 2], [0.0; 2]);
        assert_eq!(
            bottcher_coordinate_eval(c, re.as_ptr(), im.as_ptr(), 2, or.as_mut_ptr(), oi.as_mut_ptr()),
            BottcherStatus::Ok
        );
        // Φ is tangent to the identity
        let d = (0..2).map(|k| (or[k] - re[k]).hypot(oi[k] - im[k])).fold(0.0, f64::max);
        assert!(d < 1e-2, "{d}");
        let (mut er, mut ei, mut disc) = ([0.0; 2], [0.0; 2], 0.0);
        assert_eq!(
            bottcher_coordinate_extend(c, re.as_ptr(), im.as_ptr(), 2, er.as_mut_ptr(), ei.as_mut_ptr(), &mut disc),
            BottcherStatus::Ok
        );
        assert!((0..2).all(|k| (er[k] - or[k]).abs() < 1e-9 && (ei[k] - oi[k]).abs() < 1e-9));
        let far = [40.0, 0.0];
        let st = bottcher_coordinate_extend(c, far.as_ptr(), zero.as_ptr(), 2, er.as_mut_ptr(), ei.as_mut_ptr(), &mut disc);
        assert_eq!(st, BottcherStatus::NotInBasin, "{}", last_error());
        bottcher_coordinate_free(c);
    }
}

#[test]
fn koch_spectrum_values() {
    unsafe {
        let mut count = 0;
        assert_eq!(bottcher_koch_fixed_point_count(3, &mut count), BottcherStatus::Ok);
        assert_eq!(count, 6);
        let (mut re, mut im, mut len) = ([0.0; 8], [0.0; 8], 0);
        assert_eq!(bottcher_koch_spectrum(5, re.as_mut_ptr(), im.as_mut_ptr(), 8, &mut len), BottcherStatus::Ok);
        assert_eq!(len, 4);
        for (a, b) in re.iter().zip([6.0, 3.0, 2.0, 1.5]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(!CStr::from_ptr(bottcher_version()).to_bytes().is_empty());
    }
}
