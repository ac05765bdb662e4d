//! Published single-node results: welfare, prices and ESR series per scenario.

use vlmarket_core::formulations::FormulationKind;

pub struct Row {
    pub scenario: u32,
    pub welfare: f64,
    pub price: [f64; 3],
    pub charge: [f64; 3],
    pub discharge: [f64; 3],
    pub soc: [f64; 3],
}

const fn row(
    scenario: u32,
    welfare: f64,
    price: [f64; 3],
    charge: [f64; 3],
    discharge: [f64; 3],
    soc: [f64; 3],
) -> Row {
    Row {
        scenario,
        welfare,
        price,
        charge,
        discharge,
        soc,
    }
}

pub const RELAXED: [Row; 4] = [
    row(
        1,
        3883.72,
        [5.0, 60.0, 10.0],
        [10.0, 0.0, 3.89],
        [0.0, 10.0, 0.0],
        [59.0, 46.5, 50.0],
    ),
    row(
        2,
        3822.0,
        [-0.1, 60.0, -0.1],
        [10.0, 0.0, 10.0],
        [0.0, 10.0, 0.0],
        [59.0, 46.5, 55.5],
    ),
    row(
        3,
        3708.60,
        [-35.0, 60.0, 10.0],
        [8.14, 0.0, 8.33],
        [1.86, 10.0, 0.0],
        [100.0, 87.5, 95.0],
    ),
    row(
        4,
        3422.0,
        [-24.9, 60.0, -0.1],
        [10.0, 0.0, 10.0],
        [0.0, 10.0, 0.0],
        [59.0, 46.5, 55.5],
    ),
];

pub const VIRTUAL_LINK: [Row; 4] = [
    row(
        1,
        3883.72,
        [5.0, 60.0, 10.0],
        [10.0, 0.0, 3.89],
        [0.0, 10.0, 0.0],
        [59.0, 46.5, 50.0],
    ),
    row(
        2,
        3822.0,
        [-0.1, 60.0, -0.1],
        [10.0, 0.0, 10.0],
        [0.0, 10.0, 0.0],
        [59.0, 46.5, 55.5],
    ),
    row(
        3,
        3633.72,
        [-35.0, 60.0, 10.0],
        [4.44, 0.0, 9.44],
        [0.0, 10.0, 0.0],
        [99.0, 86.5, 95.0],
    ),
    row(
        4,
        3422.0,
        [-0.1, 60.0, -24.9],
        [10.0, 0.0, 10.0],
        [0.0, 10.0, 0.0],
        [59.0, 46.5, 55.5],
    ),
];

/// Formulations with published rows and their table.
pub fn tables() -> [(FormulationKind, &'static [Row; 4]); 2] {
    [
        (FormulationKind::EsrRelaxed, &RELAXED),
        (FormulationKind::VirtualLink, &VIRTUAL_LINK),
    ]
}

pub const WELFARE_TOL: f64 = 0.01;
pub const SERIES_TOL: f64 = 0.01;
pub const PRICE_TOL: f64 = 0.05;
