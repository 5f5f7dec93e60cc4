//! Element tables: symbols, standard atomic weights, default valences.

/// Element symbols indexed by `atomic_number - 1`.
const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Standard atomic weights (conventional values) for Z = 1..=86.
const MASSES: [f64; 86] = [
    1.008, 4.0026, 6.94, 9.0122, 10.81, 12.011, 14.007, 15.999, 18.998, 20.180, 22.990, 24.305,
    26.982, 28.085, 30.974, 32.06, 35.45, 39.948, 39.098, 40.078, 44.956, 47.867, 50.942, 51.996,
    54.938, 55.845, 58.933, 58.693, 63.546, 65.38, 69.723, 72.630, 74.922, 78.971, 79.904, 83.798,
    85.468, 87.62, 88.906, 91.224, 92.906, 95.95, 97.0, 101.07, 102.91, 106.42, 107.87, 112.41,
    114.82, 118.71, 121.76, 127.60, 126.90, 131.29, 132.91, 137.33, 138.91, 140.12, 140.91, 144.24,
    145.0, 150.36, 151.96, 157.25, 158.93, 162.50, 164.93, 167.26, 168.93, 173.05, 174.97, 178.49,
    180.95, 183.84, 186.21, 190.23, 192.22, 195.08, 196.97, 200.59, 204.38, 207.2, 208.98, 209.0,
    210.0, 222.0,
];

/// Non-metal elements always accepted: H, B, C, N, O, F, Si, P, S, Cl, Br, I.
pub const ORGANIC_ELEMENTS: [u8; 12] = [1, 5, 6, 7, 8, 9, 14, 15, 16, 17, 35, 53];

/// Alkali, alkaline-earth, transition metals and lanthanides, plus the common
/// post-transition metals (Al, Ga, In, Sn, Tl, Pb, Bi).
pub fn default_metals() -> Vec<u8> {
    let mut metals = vec![
        3, 4, 11, 12, 13, 19, 20, 31, 37, 38, 49, 50, 55, 56, 81, 82, 83,
    ];
    metals.extend(21..=30);
    metals.extend(39..=48);
    metals.extend(57..=80);
    metals.sort_unstable();
    metals
}

pub fn symbol(z: u8) -> &'static str {
    SYMBOLS
        .get(usize::from(z).wrapping_sub(1))
        .copied()
        .unwrap_or("?")
}

pub fn atomic_number(symbol: &str) -> Option<u8> {
    SYMBOLS
        .iter()
        .position(|&s| s == symbol)
        .map(|i| (i + 1) as u8)
}

pub fn atomic_mass(z: u8) -> f64 {
    MASSES
        .get(usize::from(z).wrapping_sub(1))
        .copied()
        .unwrap_or(0.0)
}

/// Default valences for uncharged atoms, ascending.
pub fn default_valences(z: u8) -> &'static [u8] {
    match z {
        1 => &[1],
        5 => &[3],
        6 => &[4],
        7 => &[3, 5],
        8 => &[2],
        9 | 17 | 35 | 53 => &[1],
        14 => &[4],
        15 => &[3, 5],
        16 => &[2, 4, 6],
        _ => &[],
    }
}

/// Lowest default valence adjusted for formal charge (isoelectronic rule):
/// N+ behaves like C, O- like F, C+/C- lose one bond, B- behaves like C.
pub fn base_valence(z: u8, charge: i8) -> Option<i32> {
    let v = i32::from(*default_valences(z).first()?);
    let q = i32::from(charge);
    let adjusted = match z {
        6 | 14 => v - q.abs(),
        5 => v - q,
        _ => v + q,
    };
    Some(adjusted.max(0))
}

pub fn is_organic_subset(z: u8) -> bool {
    matches!(z, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
}

pub fn is_halogen(z: u8) -> bool {
    matches!(z, 9 | 17 | 35 | 53)
}
