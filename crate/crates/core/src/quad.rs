//! Globally adaptive 21-point Gauss-Kronrod quadrature.

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_526_017_455,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

// Gauss-Legendre nodes on [0, 1] of the reference interval [-1, 1] and their weights.
const GL4: [(f64, f64); 2] = [
    (0.339_981_043_584_856_264_802_665_759_103_244_7, 0.652_145_154_862_546_142_626_936_050_778_000_6),
    (0.861_136_311_594_052_575_223_946_488_892_809_5, 0.347_854_845_137_453_857_373_063_949_222_000_4),
];

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_804_939_476_142_360_184_0, 0.362_683_783_378_361_982_965_150_449_277_195_6),
    (0.525_532_409_916_328_985_817_739_049_189_246_3, 0.313_706_645_877_887_287_337_962_201_986_601_3),
    (0.796_666_477_413_626_739_591_553_936_475_830_4, 0.222_381_034_453_374_470_544_355_994_426_240_9),
    (0.960_289_856_497_536_231_683_560_868_569_472_9, 0.101_228_536_290_376_259_152_531_354_309_962_2),
];

/// `(∫_a^b f, ∫_a^b f(x) (x - a)/(b - a) dx)` by a fixed Gauss-Legendre rule with
/// 4 or 8 points (any other `n` is rounded up to 8).
pub(crate) fn gauss_moments(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let rule: &[(f64, f64)] = if n <= 4 { &GL4 } else { &GL8 };
    let h = 0.5 * (b - a);
    let (mut total, mut far) = (0.0, 0.0);
    for &(x, w) in rule {
        for s in [-x, x] {
            let v = w * f(a + h * (1.0 + s));
            total += v;
            far += v * 0.5 * (1.0 + s);
        }
    }
    (total * h, far * h)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

/// Integrates `f` over consecutive breakpoints, refining the segment with the
/// largest error estimate until the total error is below
/// `max(abs_tol, rel_tol * |I|)` or `max_segments` is reached.
///
/// Returns `(value, error_estimate)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> (f64, f64) {
    let mut segs: Vec<Segment> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod21(&mut f, w[0], w[1]))
        .collect();
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || segs.len() >= max_segments {
            return (value, error);
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let worst = segs.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision; keep it as is
            segs.push(Segment { error: 0.0, ..worst });
            continue;
        }
        segs.push(kronrod21(&mut f, worst.a, mid));
        segs.push(kronrod21(&mut f, mid, worst.b));
    }
}
