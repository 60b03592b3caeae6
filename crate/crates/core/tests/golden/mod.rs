//! Published three-decimal Gaussian order-statistic reduction factors.
#![allow(dead_code, clippy::approx_constant)]

/// (n, k, alpha): distinct variances of the k-th of n standard-normal order
/// statistics. Mirror ranks n+1-k share the value.
pub const ALPHA: &[(usize, usize, f64)] = &[
    (1, 1, 1.00),
    (2, 1, 0.682),
    (3, 1, 0.560),
    (3, 2, 0.449),
    (4, 1, 0.492),
    (4, 2, 0.360),
    (5, 1, 0.448),
    (5, 2, 0.312),
    (5, 3, 0.287),
    (6, 1, 0.416),
    (6, 2, 0.280),
    (6, 3, 0.246),
    (7, 1, 0.392),
    (7, 2, 0.257),
    (7, 3, 0.220),
    (7, 4, 0.210),
    (8, 1, 0.373),
    (8, 2, 0.239),
    (8, 3, 0.201),
    (8, 4, 0.187),
    (9, 1, 0.357),
    (9, 2, 0.226),
    (9, 3, 0.186),
    (9, 4, 0.171),
    (9, 5, 0.166),
    (10, 1, 0.344),
    (10, 2, 0.215),
    (10, 3, 0.175),
    (10, 4, 0.158),
    (10, 5, 0.151),
];

/// (n, k, l, B): covariances between the k-th and l-th order statistics.
pub const B_COV: &[(usize, usize, usize, f64)] = &[
    (2, 1, 2, 0.318),
    (3, 1, 2, 0.276),
    (3, 1, 3, 0.165),
    (4, 1, 2, 0.246),
    (4, 1, 3, 0.158),
    (4, 1, 4, 0.105),
    (4, 2, 3, 0.236),
    (5, 1, 2, 0.224),
    (5, 1, 3, 0.148),
    (5, 1, 4, 0.106),
    (5, 1, 5, 0.074),
    (5, 2, 3, 0.208),
    (5, 2, 4, 0.150),
    (6, 1, 2, 0.209),
    (6, 1, 3, 0.139),
    (6, 1, 4, 0.102),
    (6, 1, 5, 0.077),
    (6, 1, 6, 0.056),
    (6, 2, 3, 0.189),
    (6, 2, 4, 0.140),
    (6, 2, 5, 0.106),
    (6, 3, 4, 0.183),
    (7, 1, 2, 0.196),
    (7, 1, 3, 0.132),
    (7, 1, 4, 0.099),
    (7, 1, 5, 0.077),
    (7, 1, 6, 0.060),
    (7, 1, 7, 0.045),
    (7, 2, 3, 0.175),
    (7, 2, 4, 0.131),
    (7, 2, 5, 0.102),
    (7, 2, 6, 0.080),
    (7, 3, 4, 0.166),
    (7, 3, 5, 0.130),
    (8, 1, 2, 0.186),
    (8, 1, 3, 0.126),
    (8, 1, 4, 0.095),
    (8, 1, 5, 0.075),
    (8, 1, 6, 0.060),
    (8, 1, 7, 0.048),
    (8, 1, 8, 0.037),
    (8, 2, 3, 0.163),
    (8, 2, 4, 0.123),
    (8, 2, 5, 0.098),
    (8, 2, 6, 0.079),
    (8, 2, 7, 0.063),
    (8, 3, 4, 0.152),
    (8, 3, 5, 0.121),
    (8, 3, 6, 0.098),
    (8, 4, 5, 0.149),
    (9, 1, 2, 0.178),
    (9, 1, 3, 0.121),
    (9, 1, 4, 0.091),
    (9, 1, 5, 0.073),
    (9, 1, 6, 0.059),
    (9, 1, 7, 0.049),
    (9, 1, 8, 0.040),
    (9, 1, 9, 0.031),
    (9, 2, 3, 0.154),
    (9, 2, 4, 0.117),
    (9, 2, 5, 0.093),
    (9, 2, 6, 0.077),
    (9, 2, 7, 0.063),
    (9, 2, 8, 0.052),
    (9, 3, 4, 0.142),
    (9, 3, 5, 0.114),
    (9, 3, 6, 0.093),
    (9, 3, 7, 0.077),
    (9, 4, 5, 0.137),
    (9, 4, 6, 0.113),
];

/// (n, spread, min-or-max) reduction factors.
pub const SPREAD: &[(usize, f64, f64)] = &[
    (2, 0.500, 0.682),
    (3, 0.362, 0.560),
    (4, 0.299, 0.492),
    (5, 0.261, 0.448),
    (6, 0.236, 0.416),
    (7, 0.219, 0.392),
    (8, 0.205, 0.373),
    (9, 0.194, 0.357),
    (10, 0.186, 0.344),
];

/// (n, ave for n, trim 2..n-1, ave for n-2).
pub const TRIM: &[(usize, f64, f64, f64)] = &[
    (3, 0.333, 0.449, 1.00),
    (4, 0.250, 0.298, 0.500),
    (5, 0.200, 0.227, 0.333),
    (6, 0.167, 0.184, 0.250),
    (7, 0.143, 0.155, 0.200),
    (8, 0.125, 0.134, 0.167),
    (9, 0.111, 0.113, 0.143),
];
