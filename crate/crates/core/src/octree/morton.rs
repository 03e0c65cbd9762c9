//! 3D Morton (z-order) codes, 21 bits per axis.

pub const MAX_LEVEL: u8 = 21;

#[inline]
fn spread(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | x << 32) & 0x1f_0000_0000_ffff;
    x = (x | x << 16) & 0x1f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact(v: u64) -> u64 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x ^ (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x ^ (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x ^ (x >> 8)) & 0x1f_0000_ff00_00ff;
    x = (x ^ (x >> 16)) & 0x1f_0000_0000_ffff;
    x = (x ^ (x >> 32)) & 0x1f_ffff;
    x
}

#[inline]
pub fn encode(c: [u32; 3]) -> u64 {
    spread(c[0] as u64) | spread(c[1] as u64) << 1 | spread(c[2] as u64) << 2
}

#[inline]
pub fn decode(code: u64) -> [u32; 3] {
    [compact(code) as u32, compact(code >> 1) as u32, compact(code >> 2) as u32]
}

/// Code of the ancestor `levels_up` levels above.
#[inline]
pub fn parent(code: u64, levels_up: u8) -> u64 {
    if levels_up >= MAX_LEVEL + 1 {
        0
    } else {
        code >> (3 * levels_up as u32)
    }
}

/// Lowest level (counting from the root at 0) at which two leaf codes at
/// `level` fall into different cells, or `None` if equal.
#[inline]
pub fn split_level(a: u64, b: u64, level: u8) -> Option<u8> {
    let x = a ^ b;
    if x == 0 {
        return None;
    }
    let msb = 63 - x.leading_zeros() as u8;
    Some(level - msb / 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_codes() {
        assert_eq!(encode([1, 0, 0]), 1);
        assert_eq!(encode([0, 1, 0]), 2);
        assert_eq!(encode([0, 0, 1]), 4);
        assert_eq!(encode([1, 1, 1]), 7);
        assert_eq!(encode([2, 0, 0]), 8);
    }

    proptest! {
        #[test]
        fn round_trip(x in 0u32..(1 << 21), y in 0u32..(1 << 21), z in 0u32..(1 << 21)) {
            prop_assert_eq!(decode(encode([x, y, z])), [x, y, z]);
        }

        #[test]
        fn parent_is_coordinate_shift(x in 0u32..(1 << 21), y in 0u32..(1 << 21), z in 0u32..(1 << 21), up in 0u8..21) {
            let p = parent(encode([x, y, z]), up);
            prop_assert_eq!(p, encode([x >> up, y >> up, z >> up]));
        }

        #[test]
        fn split_level_matches_parents(a in 0u64..(1 << 30), b in 0u64..(1 << 30)) {
            let level = 10u8;
            match split_level(a, b, level) {
                None => prop_assert_eq!(a, b),
                Some(l) => {
                    prop_assert_ne!(parent(a, level - l), parent(b, level - l));
                    if l > 0 {
                        prop_assert_eq!(parent(a, level - l + 1), parent(b, level - l + 1));
                    }
                }
            }
        }
    }
}
