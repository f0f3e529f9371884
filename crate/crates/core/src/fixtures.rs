//! Worked four-node example (q = 31, t = 3) used by the demo, the verifier
//! and the tests.
//!
//! Values are kept as printed in the original worked example. Two printed
//! values disagree with their own derivations and are kept verbatim here,
//! with the recomputed value alongside:
//!
//! * the epoch-2 secret prints 36 at (0,0), while `S·reverse_rows(S)` gives 32.
//!   Every downstream epoch-2 number was computed from the printed 36, so the
//!   printed matrix is what gets injected for the epoch-2 checks.
//! * the key-table row for K(1,4) prints Alice's private row as
//!   `[25 30 23 1]`; the key it lists (22) requires `[25 30 23 11]`.

use crate::blom::{BlomError, SchemeParams, SchemeState, Variant, INITIAL_EPOCH};
use crate::gfmat::{Matrix, PrimeModulus};

pub const Q: u64 = 31;
pub const T: usize = 3;
pub const NAMES: [&str; 4] = ["Alice", "Bob", "Charlie", "David"];

pub const PUBLIC: [[u64; 4]; 4] = [[1, 2, 3, 4], [1, 0, 1, 1], [2, 1, 3, 1], [4, 0, 9, 5]];

/// Random factor whose product with its transpose is the epoch-1 secret.
pub const SECRET_FACTOR: [[u64; 4]; 4] = [[1, 0, 1, 1], [1, 2, 0, 1], [0, 0, 1, 1], [0, 2, 3, 1]];

pub const SECRET: [[u64; 4]; 4] = [[3, 2, 2, 4], [2, 6, 1, 5], [2, 1, 2, 4], [4, 5, 4, 14]];

/// `S·P` before reduction.
pub const SECRET_TIMES_PUBLIC_UNREDUCED: [[u64; 4]; 4] =
    [[25, 8, 53, 36], [30, 5, 60, 40], [23, 6, 49, 31], [73, 12, 155, 95]];

pub const PRIVATE: [[u64; 4]; 4] = [[25, 30, 23, 11], [8, 5, 6, 12], [22, 29, 18, 0], [5, 9, 0, 2]];

/// Epoch-2 secret exactly as printed (entry (0,0) = 36).
pub const SECRET_EPOCH2_PRINTED: [[u64; 4]; 4] =
    [[36, 37, 26, 76], [37, 32, 31, 77], [26, 31, 20, 58], [76, 77, 58, 152]];

/// `S·reverse_rows(S)` over the integers.
pub const SECRET_EPOCH2_RECOMPUTED: [[u64; 4]; 4] =
    [[32, 37, 26, 76], [37, 32, 31, 77], [26, 31, 20, 58], [76, 77, 58, 152]];

/// `(S'·P)ᵀ` before reduction, from the printed epoch-2 secret.
pub const PRIVATE_EPOCH2_UNREDUCED: [[u64; 4]; 4] = [
    [429, 439, 329, 877],
    [98, 105, 72, 210],
    [907, 929, 691, 1847],
    [587, 596, 445, 1199],
];

pub const PRIVATE_EPOCH2: [[u64; 4]; 4] =
    [[26, 5, 19, 9], [5, 12, 10, 24], [8, 30, 9, 18], [29, 7, 11, 21]];

/// Bob–Charlie key at epoch 1 and epoch 2.
pub const BOB_CHARLIE_EPOCH1: u64 = 0;
pub const BOB_CHARLIE_EPOCH2: u64 = 25;

/// One row of the all-pairs key table (1-based node numbers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyTableRow {
    pub from: usize,
    pub to: usize,
    pub public_column: [u64; 4],
    pub private_row: [u64; 4],
    pub key: u64,
}

const fn row(from: usize, to: usize, public_column: [u64; 4], private_row: [u64; 4], key: u64) -> KeyTableRow {
    KeyTableRow {
        from,
        to,
        public_column,
        private_row,
        key,
    }
}

/// The twelve directed keys, in the printed order. K(1,4) uses the corrected
/// private row `[25, 30, 23, 11]`.
pub const KEY_TABLE: [KeyTableRow; 12] = [
    row(1, 2, [2, 0, 1, 0], [25, 30, 23, 11], 11),
    row(2, 1, [1, 1, 2, 4], [8, 5, 6, 12], 11),
    row(1, 3, [3, 1, 3, 9], [25, 30, 23, 11], 25),
    row(3, 1, [1, 1, 2, 4], [22, 29, 18, 0], 25),
    row(1, 4, [4, 1, 1, 5], [25, 30, 23, 11], 22),
    row(4, 1, [1, 1, 2, 4], [5, 9, 0, 2], 22),
    row(2, 3, [3, 1, 3, 9], [8, 5, 6, 12], 0),
    row(3, 2, [2, 0, 1, 0], [22, 29, 18, 0], 0),
    row(2, 4, [4, 1, 1, 5], [8, 5, 6, 12], 10),
    row(4, 2, [2, 0, 1, 0], [5, 9, 0, 2], 10),
    row(3, 4, [4, 1, 1, 5], [22, 29, 18, 0], 11),
    row(4, 3, [3, 1, 3, 9], [5, 9, 0, 2], 11),
];

/// The K(1,4) private row as printed.
pub const KEY_TABLE_ALICE_ROW_AS_PRINTED: [u64; 4] = [25, 30, 23, 1];

pub fn modulus() -> PrimeModulus {
    PrimeModulus::new(Q).expect("31 is prime")
}

pub fn params() -> SchemeParams {
    SchemeParams::new(T, modulus(), 4, Variant::Modified).expect("fixture parameters are valid")
}

pub fn public() -> Matrix {
    Matrix::from_rows(&PUBLIC, modulus()).expect("fixture public matrix")
}

pub fn secret() -> Matrix {
    Matrix::from_rows(&SECRET, modulus()).expect("fixture secret matrix")
}

/// Printed epoch-2 secret reduced mod 31.
pub fn secret_epoch2_printed() -> Matrix {
    Matrix::from_rows_reduced(&SECRET_EPOCH2_PRINTED, modulus()).expect("fixture epoch-2 secret")
}

/// Epoch-1 state built from the fixture `P` and `S`.
pub fn example_state() -> Result<SchemeState, BlomError> {
    SchemeState::from_parts(params(), public(), secret(), INITIAL_EPOCH, 0)
}
