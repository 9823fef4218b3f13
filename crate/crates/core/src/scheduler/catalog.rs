//! Common-signaling resource catalog at MCS 6 (QPSK, code rate 449/1024).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Signal {
    Ssb,
    Coreset0Ss0,
    Coreset1Ss1,
    Sib1,
    Sib19,
    Paging,
    Msg2,
    Msg4,
}

impl Signal {
    pub fn name(&self) -> &'static str {
        match self {
            Signal::Ssb => "SSB",
            Signal::Coreset0Ss0 => "CORESET0_SS0",
            Signal::Coreset1Ss1 => "CORESET1_SS1",
            Signal::Sib1 => "SIB1",
            Signal::Sib19 => "SIB19",
            Signal::Paging => "PAGING",
            Signal::Msg2 => "MSG2",
            Signal::Msg4 => "MSG4",
        }
    }
}

/// One transport-block size of a signal and the (PRBs, symbols) shapes that carry it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalResource {
    pub signal: Signal,
    pub payload_bits: u32,
    /// Users addressed, for paging and random-access responses.
    pub ue: u32,
    pub shapes: Vec<(usize, usize)>,
}

pub const SUBCARRIERS_PER_PRB: usize = 12;
pub const QPSK_BITS: f64 = 2.0;
pub const CODE_RATE: f64 = 449.0 / 1024.0;

/// Resource elements needed for `payload_bits` at MCS 6.
pub fn required_res(payload_bits: u32) -> usize {
    (payload_bits as f64 / (QPSK_BITS * CODE_RATE)).ceil() as usize
}

pub fn shape_res(prbs: usize, symbols: usize) -> usize {
    prbs * symbols * SUBCARRIERS_PER_PRB
}

/// Fixed footprints of the synchronization and control blocks, (PRBs, symbols).
pub const SSB_SHAPE: (usize, usize) = (20, 4);
pub const CORESET0_SHAPE: (usize, usize) = (48, 2);
pub const CORESET1_SHAPE: (usize, usize) = (132, 1);

/// Data-carrying entries, largest variant of each signal first.
pub fn catalog() -> Vec<SignalResource> {
    let r = |signal, payload_bits, ue, shapes: &[(usize, usize)]| SignalResource {
        signal,
        payload_bits,
        ue,
        shapes: shapes.to_vec(),
    };
    vec![
        r(Signal::Sib1, 1280, 0, &[(70, 2)]),
        r(Signal::Sib19, 616, 0, &[(33, 4)]),
        r(Signal::Paging, 1280, 32, &[(70, 2), (33, 4), (22, 6)]),
        r(Signal::Paging, 600, 15, &[(34, 2), (16, 4)]),
        r(Signal::Msg2, 630, 9, &[(11, 6)]),
        r(Signal::Msg2, 560, 8, &[(15, 4)]),
        r(Signal::Msg2, 490, 7, &[(27, 2)]),
        r(Signal::Msg4, 1040, 0, &[(57, 2), (27, 4), (18, 6), (8, 13)]),
    ]
}

/// Variants of one signal from `catalog`, in catalog order.
pub fn variants(catalog: &[SignalResource], signal: Signal) -> Vec<SignalResource> {
    catalog
        .iter()
        .filter(|r| r.signal == signal)
        .cloned()
        .collect()
}

/// Start symbols allowed for a PDSCH of `symbols` length by the default
/// time-domain allocation table (normal CP, first DM-RS at symbol 2).
pub fn default_table_starts(symbols: usize) -> &'static [usize] {
    match symbols {
        2 => &[5, 9, 12],
        4 => &[2, 4, 8, 9],
        5 => &[2],
        6 => &[1],
        7 => &[2, 4, 5],
        9 | 10 | 12 => &[2],
        13 => &[1],
        _ => &[],
    }
}

/// SNR needed by the synchronization block for 1% BLER, dB.
pub const SSB_REQUIRED_SNR_DB: f64 = -6.3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resource_element_counts() {
        assert_eq!(required_res(1280), 1460);
        assert_eq!(required_res(0), 0);
        assert_eq!(7 * 70, 490);
        assert!(shape_res(70, 2) >= 1460);
    }

    #[test]
    fn every_shape_carries_its_payload() {
        for r in catalog() {
            for &(p, s) in &r.shapes {
                assert!(
                    shape_res(p, s) >= required_res(r.payload_bits),
                    "{:?} {}x{}",
                    r.signal,
                    p,
                    s
                );
            }
        }
    }

    #[test]
    fn shapes_fit_the_carrier() {
        for r in catalog() {
            for &(p, s) in &r.shapes {
                assert!(p <= 132 && s <= 14);
            }
        }
    }
}
