//! sRGB to CIELAB conversion (D65 white point).

/// Row-major sRGB(linear) -> CIEXYZ matrix for the D65 white point.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_390_799_265_959_5, 0.357_584_339_383_878, 0.180_480_788_401_834_3],
    [0.212_639_005_871_510_27, 0.715_168_678_767_756, 0.072_192_315_360_733_71],
    [0.019_330_818_715_591_82, 0.119_194_779_794_626, 0.950_532_152_249_660_5],
];

// Reference white = the matrix applied to (1,1,1), summed in the same order
// as the per-pixel dot product so that pure white lands exactly on (1,1,1)
// after normalization.
const WHITE_X: f64 = SRGB_TO_XYZ[0][0] + SRGB_TO_XYZ[0][1] + SRGB_TO_XYZ[0][2];
const WHITE_Y: f64 = SRGB_TO_XYZ[1][0] + SRGB_TO_XYZ[1][1] + SRGB_TO_XYZ[1][2];
const WHITE_Z: f64 = SRGB_TO_XYZ[2][0] + SRGB_TO_XYZ[2][1] + SRGB_TO_XYZ[2][2];

const LAB_EPSILON: f64 = 216.0 / 24389.0; // (6/29)^3
const LAB_KAPPA: f64 = 24389.0 / 27.0;

/// Decode one sRGB-encoded sample in [0,1] to linear light.
pub fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

/// Convert one sRGB pixel (samples in [0,1]) to CIELAB.
pub fn srgb_to_lab(r: f64, g: f64, b: f64) -> [f64; 3] {
    let (lr, lg, lb) = (srgb_decode(r), srgb_decode(g), srgb_decode(b));
    let x = SRGB_TO_XYZ[0][0] * lr + SRGB_TO_XYZ[0][1] * lg + SRGB_TO_XYZ[0][2] * lb;
    let y = SRGB_TO_XYZ[1][0] * lr + SRGB_TO_XYZ[1][1] * lg + SRGB_TO_XYZ[1][2] * lb;
    let z = SRGB_TO_XYZ[2][0] * lr + SRGB_TO_XYZ[2][1] * lg + SRGB_TO_XYZ[2][2] * lb;

    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);

    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}
