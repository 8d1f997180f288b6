//! Jam-B slot ownership.
//!
//! Receiver `i` (0-based) owns the exclusive slots `i, i + r, i + 2r, ...`,
//! `floor(k / r)` of them, which spreads each receiver's slots as far apart
//! as the stride allows. The `k mod r` leftover slots at the end are handed
//! out round-robin, so each is shared by `ceil(r / leftover)` receivers at
//! most and every slot has an owner.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVectorSchedule {
    slots: u32,
    exclusive: Vec<u64>,
    shared: Vec<u64>,
}

impl BitVectorSchedule {
    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn receivers(&self) -> usize {
        self.exclusive.len()
    }

    /// Full bit vector of receiver `i`; bit `j` set means it jams in slot `j`.
    pub fn bits(&self, receiver: usize) -> u64 {
        self.exclusive[receiver] | self.shared[receiver]
    }

    pub fn exclusive_bits(&self, receiver: usize) -> u64 {
        self.exclusive[receiver]
    }

    pub fn shared_bits(&self, receiver: usize) -> u64 {
        self.shared[receiver]
    }

    pub fn jams_in(&self, receiver: usize, slot: u32) -> bool {
        self.bits(receiver) >> slot & 1 == 1
    }

    /// Receivers scheduled to jam in `slot`.
    pub fn owners(&self, slot: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.receivers()).filter(move |&i| self.jams_in(i, slot))
    }
}

pub fn build_bitvector_schedule(receivers: usize, slots: usize) -> Result<BitVectorSchedule> {
    if receivers == 0 || receivers > slots || slots > 64 {
        return Err(Error::InvalidSchedule { receivers, slots });
    }
    let per_node = slots / receivers;
    let exclusive: Vec<u64> = (0..receivers)
        .map(|i| (0..per_node).fold(0u64, |bv, m| bv | 1 << (i + m * receivers)))
        .collect();
    let first_leftover = per_node * receivers;
    let leftover = slots - first_leftover;
    let shared: Vec<u64> = (0..receivers)
        .map(|i| {
            if leftover == 0 {
                0
            } else {
                1 << (first_leftover + i % leftover)
            }
        })
        .collect();
    Ok(BitVectorSchedule {
        slots: slots as u32,
        exclusive,
        shared,
    })
}
