//! Layer-by-layer output shapes transcribed from the published architecture
//! tables, with two resolutions: the generator's duplicated "Decoder 1" rows
//! collapse into one stage ending at `9x6x1`, and its output row reads
//! `9x6x1` instead of the printed `9x2x1`.

pub type Row = (&'static str, &'static [usize]);

pub const GENERATOR: &[Row] = &[
    ("Input", &[9, 6, 1]),
    ("Encoder 1", &[7, 5, 4]),
    ("Encoder 2", &[5, 4, 8]),
    ("Encoder 3", &[3, 3, 16]),
    ("Encoder 4", &[1, 2, 32]),
    ("Decoder 4", &[3, 3, 16]),
    ("Decoder 3", &[5, 4, 8]),
    ("Decoder 2", &[7, 5, 4]),
    ("Decoder 1", &[9, 6, 1]),
    ("Output", &[9, 6, 1]),
];

pub const DISCRIMINATOR: &[Row] = &[
    ("Input", &[9, 6, 1]),
    ("Conv 1", &[9, 6, 4]),
    ("IN 1", &[9, 6, 4]),
    ("Conv 2", &[4, 3, 8]),
    ("IN 2", &[4, 3, 8]),
    ("Conv 3", &[2, 1, 16]),
    ("IN 3", &[2, 1, 16]),
    ("Conv 4", &[1, 1, 1]),
    ("Output", &[1]),
];

pub const CROP_MAPPER: &[Row] = &[
    ("Input", &[9, 6, 1]),
    ("Conv 1", &[9, 6, 2]),
    ("BN 1", &[9, 6, 2]),
    ("Conv 2", &[4, 3, 2]),
    ("BN 2", &[4, 3, 2]),
    ("Conv 3", &[2, 1, 4]),
    ("BN 3", &[2, 1, 4]),
    ("Flatten", &[8]),
    ("FC 1", &[4]),
    ("FC 2", &[1]),
    ("Output", &[1]),
];
