//! All quartet maps of a system, with Pauli strings shared across quartets
//! and measured once each.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DVector;
use rayon::prelude::*;

use super::map::{
    build_map, enumerate_quartets, exact_pauli_expectations, ElementRef, FermiPauliMap,
};
use super::noise::{simulate_shots, stream_rng};
use crate::completion::SampleSet;
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::rdm::{OneRDM, SpinRDMSet, SpinSector, SystemMeta};

/// Tolerance for two quartets disagreeing on a shared string.
const SHARED_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MeasurementScheme {
    meta: SystemMeta,
    maps: Vec<FermiPauliMap>,
    strings: Vec<PauliString>,
    /// Global string index of every string of every map.
    string_index: Vec<Vec<usize>>,
    /// Every packed element with the quartet that measures it.
    elements: Vec<(ElementRef, usize)>,
}

/// What gets measured: whole quartets, optionally keeping only some of
/// their elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub quartets: Vec<usize>,
    /// Elements written; `None` keeps every element of the quartets.
    pub elements: Option<BTreeSet<ElementRef>>,
}

impl Selection {
    pub fn quartets(quartets: Vec<usize>) -> Self {
        Self {
            quartets,
            elements: None,
        }
    }
}

/// Elements written by a measurement, with their positions per sector.
#[derive(Debug, Clone)]
pub struct MeasuredRdm {
    /// Measured values; unmeasured positions hold zero.
    pub values: SpinRDMSet,
    /// Measured positions per sector, in `SpinSector::ALL` order.
    pub samples: [SampleSet; 3],
    pub quartets: Vec<usize>,
    /// Distinct strings measured.
    pub n_settings: usize,
    /// Shots per string, `None` for exact expectations.
    pub shots: Option<u64>,
}

impl MeasuredRdm {
    pub fn sample(&self, s: SpinSector) -> &SampleSet {
        &self.samples[s as usize]
    }

    pub fn total_shots(&self) -> u64 {
        self.shots.unwrap_or(0) * self.n_settings as u64
    }
}

impl MeasurementScheme {
    pub fn new(meta: SystemMeta) -> Result<Self> {
        let maps: Vec<FermiPauliMap> = enumerate_quartets(meta)
            .par_iter()
            .map(|q| build_map(q, meta.n))
            .collect::<Result<_>>()?;
        let mut lookup: HashMap<PauliString, usize> = HashMap::new();
        let mut strings = Vec::new();
        let mut string_index = Vec::with_capacity(maps.len());
        for map in &maps {
            let idx = map
                .strings
                .iter()
                .map(|s| {
                    *lookup.entry(s.clone()).or_insert_with(|| {
                        strings.push(s.clone());
                        strings.len() - 1
                    })
                })
                .collect();
            string_index.push(idx);
        }
        let elements = maps
            .iter()
            .enumerate()
            .flat_map(|(q, m)| m.element_slots().into_iter().map(move |(_, e)| (e, q)))
            .collect();
        Ok(Self {
            meta,
            maps,
            strings,
            string_index,
            elements,
        })
    }

    pub fn meta(&self) -> SystemMeta {
        self.meta
    }

    pub fn maps(&self) -> &[FermiPauliMap] {
        &self.maps
    }

    pub fn n_quartets(&self) -> usize {
        self.maps.len()
    }

    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    /// Every packed element and the quartet measuring it.
    pub fn elements(&self) -> &[(ElementRef, usize)] {
        &self.elements
    }

    /// Distinct strings needed by the given quartets.
    pub fn settings_for(&self, quartets: &[usize]) -> Vec<usize> {
        let mut used: Vec<usize> = quartets
            .iter()
            .flat_map(|&q| self.string_index[q].iter().cloned())
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    /// Exact expectation of every global string. Strings shared between
    /// quartets must agree.
    pub fn exact_expectations(&self, p: &SpinRDMSet, d: &OneRDM) -> Result<Vec<f64>> {
        let mut out = vec![f64::NAN; self.strings.len()];
        for (map, idx) in self.maps.iter().zip(&self.string_index) {
            let v = exact_pauli_expectations(p, d, map)?;
            for (local, &g) in idx.iter().enumerate() {
                if out[g].is_nan() {
                    out[g] = v[local];
                } else if (out[g] - v[local]).abs() > SHARED_TOL {
                    return Err(Error::InvalidSystem(format!(
                        "string {} has inconsistent expectations {} and {}",
                        self.strings[g], out[g], v[local]
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Measures the strings of `quartets` with `shots` each (`None` skips
    /// sampling) and reconstructs their elements. Each string uses its own
    /// random stream of `seed`, so results do not depend on which other
    /// strings are measured.
    pub fn measure(
        &self,
        p: &SpinRDMSet,
        d: &OneRDM,
        quartets: &[usize],
        shots: Option<u64>,
        seed: u64,
    ) -> Result<MeasuredRdm> {
        self.measure_selection(p, d, &Selection::quartets(quartets.to_vec()), shots, seed)
    }

    /// As [`measure`](Self::measure), writing only the selected elements.
    pub fn measure_selection(
        &self,
        p: &SpinRDMSet,
        d: &OneRDM,
        selection: &Selection,
        shots: Option<u64>,
        seed: u64,
    ) -> Result<MeasuredRdm> {
        let quartets = &selection.quartets;
        let exact = self.exact_expectations(p, d)?;
        let settings = self.settings_for(quartets);
        let mut observed = vec![f64::NAN; self.strings.len()];
        for &g in &settings {
            observed[g] = match shots {
                None => exact[g],
                Some(m) => simulate_shots(exact[g], m, &mut stream_rng(seed, g as u64)),
            };
        }
        let n = self.meta.n;
        let mut values = SpinRDMSet::zeros(self.meta);
        let mut positions: [Vec<(usize, usize)>; 3] = Default::default();
        for &qi in quartets.iter() {
            let map = &self.maps[qi];
            let q = DVector::from_iterator(
                map.strings.len(),
                self.string_index[qi].iter().map(|&g| observed[g]),
            );
            let x = map.reconstruct(&q);
            for (slot, e) in map.element_slots() {
                if selection
                    .elements
                    .as_ref()
                    .is_some_and(|keep| !keep.contains(&e))
                {
                    continue;
                }
                values.sector_mut(e.sector).set(e.row, e.col, x[slot]);
                positions[e.sector as usize].push((e.row, e.col));
            }
        }
        let samples = SpinSector::ALL.map(|s| {
            let pos = std::mem::take(&mut positions[s as usize]);
            SampleSet::from_indices(s.dim(n), pos, seed)
                .expect("positions come from valid elements")
                .with_sector(s)
        });
        Ok(MeasuredRdm {
            values,
            samples,
            quartets: quartets.clone(),
            n_settings: settings.len(),
            shots,
        })
    }

    /// Every quartet, i.e. the standard scheme.
    pub fn all_quartets(&self) -> Vec<usize> {
        (0..self.maps.len()).collect()
    }
}
