//! Independent reference values for the Bessel functions.
//!
//! `TABLE` rows are `(x, J0, J1, Y0, Y1)` evaluated with 40-digit arithmetic
//! (mpmath) and frozen here. `series_j0` / `series_y0` are plain ascending
//! power series used for the small-argument checks; they share no code with
//! the library.

#![allow(dead_code)]

pub const TABLE: &[(f64, f64, f64, f64, f64)] = &[
    (0.1, 0.997501562066040032, 0.049937526036242000321, -1.5342386513503668083, -6.4589510947020266377),
    (0.5, 0.93846980724081290423, 0.24226845767487388638, -0.44451873350670655715, -1.4714723926702430692),
    (1.0, 0.76519768655796655145, 0.44005058574493351596, 0.088256964215676957983, -0.78121282130028871655),
    (2.0, 0.22389077914123566805, 0.5767248077568733872, 0.5103756726497451196, -0.10703243154093754689),
    (4.0, -0.39714980986384737229, -0.066043328023549136143, -0.016940739325064991904, 0.39792571055710000525),
    (7.5, 0.26633965788037839687, 0.13524842757970550518, 0.11731328614820863084, -0.2591285104861162518),
    (8.0, 0.17165080713755390609, 0.23463634685391462438, 0.22352148938756622053, -0.15806046173124749426),
    (8.5, 0.041939251842934503552, 0.27312196367405374427, 0.270205105365787476, -0.026168679398537470028),
    (10.0, -0.2459357644513483352, 0.04347274616886143667, 0.055671167283599391424, 0.24901542420695388392),
    (12.3, 0.11079795030758543979, -0.1942588480405913927, -0.19859309463502620836, -0.1189484032992661564),
    (17.0, -0.16985425215118354791, -0.097668492757780650236, -0.092637198442323692527, 0.16720503607723368646),
    (24.9, 0.083245968353015490053, -0.13485569953140886933, -0.13649918399676523538, -0.086002557595554252479),
    (25.0, 0.096266783275958116174, -0.12535024958028990465, -0.12724943226800613783, -0.098829964783237410053),
    (25.1, 0.10827567149994945198, -0.11463478413442256746, -0.1167677076380369472, -0.11062223322783098811),
    (40.0, 0.0073668905842372895535, 0.12603831803758499921, 0.12593641705826092925, -0.0057935058215496329412),
    (85.0, -0.07094039479627329546, 0.049151460334891061983, 0.049567884951494233271, 0.071233187582749783195),
    (100.0, 0.019985850304223122424, -0.077145352014112158033, -0.077244313365083152254, -0.020372312002759793305),
    (333.3, 0.038466654416718674802, -0.020687550206813364829, -0.020745232486426934675, -0.038497818590544024103),
    (1000.0, 0.024786686152420174561, 0.0047283119070895239176, 0.0047159179776228133998, -0.024784331292351778915),
    (10000.0, -0.0070961603533888014773, 0.0036474507555295803441, 0.0036478055589866058867, 0.007096342752536495135),
];

/// First positive zero of J0 (40-digit reference).
pub const J0_FIRST_ZERO: f64 = 2.404825557695772768621631879326454643124;

/// `sum_{m<30} (-1)^m (x/2)^{2m} / (m!)^2`.
pub fn series_j0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..30 {
        term *= -q / (m * m) as f64;
        sum += term;
    }
    sum
}

/// `(2/pi)(ln(x/2) + gamma) J0(x) + (2/pi) sum_{m>=1} (-1)^{m+1} H_m (x/2)^{2m} / (m!)^2`.
pub fn series_y0(x: f64) -> f64 {
    let gamma = 0.5772156649015328606065120900824024310422;
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut h = 0.0;
    let mut sum = 0.0;
    for m in 1..30 {
        term *= -q / (m * m) as f64;
        h += 1.0 / m as f64;
        sum -= h * term;
    }
    let pi = std::f64::consts::PI;
    2.0 / pi * ((x / 2.0).ln() + gamma) * series_j0(x) + 2.0 / pi * sum
}

/// Bisection for the root of `f` in `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-15 {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
