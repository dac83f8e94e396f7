//! Partitioning construction from the location forest: minimum-count cell
//! filtering, multi-level coarsening, sample-to-cell assignment, and cell
//! centers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geo::GeoCoordinate;
use crate::hierarchy::{AddressVector, LocationForest, LocationId};

/// How the representative coordinate of a cell is computed from its assigned
/// samples.
///
/// `Spherical` averages unit vectors on the sphere and projects back, which
/// behaves correctly across the antimeridian. `Arithmetic` is the plain
/// lat/lon mean; it is kept for exact reproduction of setups that used it,
/// but gives nonsense for cells straddling the antimeridian (see the
/// `cell_center` tests).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CenterMode {
    #[default]
    Spherical,
    Arithmetic,
}

impl std::str::FromStr for CenterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(CenterMode::Spherical),
            "arithmetic" => Ok(CenterMode::Arithmetic),
            other => Err(Error::Config(format!(
                "unknown center mode '{other}' (expected 'spherical' or 'arithmetic')"
            ))),
        }
    }
}

/// Representative coordinate for a set of assigned sample coordinates.
pub fn cell_center(assigned: &[GeoCoordinate], mode: CenterMode) -> Result<GeoCoordinate> {
    if assigned.is_empty() {
        return Err(Error::EmptyInput("cell center needs at least one sample"));
    }
    match mode {
        CenterMode::Arithmetic => {
            let n = assigned.len() as f64;
            let lat = assigned.iter().map(|c| c.lat_deg()).sum::<f64>() / n;
            let lon = assigned.iter().map(|c| c.lon_deg()).sum::<f64>() / n;
            GeoCoordinate::new(lat, lon)
        }
        CenterMode::Spherical => {
            let (mut x, mut y, mut z) = (0.0_f64, 0.0_f64, 0.0_f64);
            for c in assigned {
                let lat = c.lat_deg().to_radians();
                let lon = c.lon_deg().to_radians();
                x += lat.cos() * lon.cos();
                y += lat.cos() * lon.sin();
                z += lat.sin();
            }
            let norm = (x * x + y * y + z * z).sqrt();
            if norm < 1e-12 {
                return Err(Error::DegenerateCellCenter);
            }
            let lat = z.atan2((x * x + y * y).sqrt()).to_degrees();
            let lon = y.atan2(x).to_degrees();
            GeoCoordinate::new(lat, lon)
        }
    }
}

/// One set of classification cells induced by a minimum sample count.
///
/// Cells are kept in a canonical sorted order; probability vectors and all
/// tie-breaks refer to that order.
#[derive(Debug, Clone)]
pub struct Partitioning {
    tau_min: u64,
    cells: Vec<LocationId>,
    index: HashMap<LocationId, usize>,
    centers: Vec<GeoCoordinate>,
    counts: Vec<u64>,
}

impl Partitioning {
    pub fn tau_min(&self) -> u64 {
        self.tau_min
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells in canonical order.
    pub fn cells(&self) -> &[LocationId] {
        &self.cells
    }

    pub fn contains(&self, cell: LocationId) -> bool {
        self.index.contains_key(&cell)
    }

    pub fn cell_index(&self, cell: LocationId) -> Option<usize> {
        self.index.get(&cell).copied()
    }

    pub fn cell_at(&self, index: usize) -> LocationId {
        self.cells[index]
    }

    pub fn center(&self, cell: LocationId) -> Option<GeoCoordinate> {
        self.cell_index(cell).map(|i| self.centers[i])
    }

    pub fn center_at(&self, index: usize) -> GeoCoordinate {
        self.centers[index]
    }

    /// Number of training samples whose remapped path contains the cell.
    pub fn count(&self, cell: LocationId) -> Option<u64> {
        self.cell_index(cell).map(|i| self.counts[i])
    }

    pub(crate) fn from_parts(
        tau_min: u64,
        cells: Vec<LocationId>,
        centers: Vec<GeoCoordinate>,
        counts: Vec<u64>,
    ) -> Self {
        let index = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Self {
            tau_min,
            cells,
            index,
            centers,
            counts,
        }
    }
}

/// Builds a partitioning from remapped samples.
///
/// A location survives when at least `tau_min` samples carry it on their
/// vector. Each sample's class is the finest surviving location of its
/// vector; the cell set is the set of classes that actually occur. A cell's
/// center is the average coordinate of the samples classed into it, and its
/// count is the number of samples carrying it (which is what `tau_min`
/// filtered on, hence always >= `tau_min`).
pub fn construct_partitioning(
    forest: &LocationForest,
    samples: &[(GeoCoordinate, AddressVector)],
    tau_min: u64,
    mode: CenterMode,
) -> Result<Partitioning> {
    if tau_min == 0 {
        return Err(Error::InvalidParameter("tau_min must be positive".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("partitioning needs samples"));
    }

    let mut carry_count: HashMap<LocationId, u64> = HashMap::new();
    for (_, address) in samples {
        for loc in address.locations() {
            if !forest.contains(*loc) {
                return Err(Error::NotInForest(*loc));
            }
            *carry_count.entry(*loc).or_insert(0) += 1;
        }
    }

    let mut members: HashMap<LocationId, Vec<GeoCoordinate>> = HashMap::new();
    for (coordinate, address) in samples {
        let class = address
            .locations()
            .iter()
            .find(|loc| carry_count[loc] >= tau_min);
        if let Some(&class) = class {
            members.entry(class).or_default().push(*coordinate);
        }
    }

    if members.is_empty() {
        return Err(Error::EmptyPartitioning { tau_min });
    }

    let mut cells: Vec<LocationId> = members.keys().copied().collect();
    cells.sort();
    let mut centers = Vec::with_capacity(cells.len());
    let mut counts = Vec::with_capacity(cells.len());
    for cell in &cells {
        centers.push(cell_center(&members[cell], mode)?);
        counts.push(carry_count[cell]);
    }
    Ok(Partitioning::from_parts(tau_min, cells, centers, counts))
}

/// Ordered tuple of partitionings, finest first, with cross-level cell maps.
#[derive(Debug, Clone)]
pub struct MultiPartitioning {
    levels: Vec<Partitioning>,
    /// `parent_maps[i]` maps each cell of level `i` to its cell at level `i+1`.
    parent_maps: Vec<HashMap<LocationId, LocationId>>,
}

impl MultiPartitioning {
    pub fn levels(&self) -> &[Partitioning] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &Partitioning {
        &self.levels[i]
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// The finest partitioning (level 0).
    pub fn finest(&self) -> &Partitioning {
        &self.levels[0]
    }

    pub fn total_cells(&self) -> usize {
        self.levels.iter().map(|p| p.len()).sum()
    }

    /// The corresponding cell one level coarser, if mapped.
    pub fn parent_cell(&self, level: usize, cell: LocationId) -> Option<LocationId> {
        self.parent_maps.get(level)?.get(&cell).copied()
    }

    /// Follows parent maps from the finest level to `target_level`.
    pub fn cell_at_level(&self, finest_cell: LocationId, target_level: usize) -> Result<LocationId> {
        let mut cell = finest_cell;
        for level in 0..target_level {
            cell = self
                .parent_cell(level, cell)
                .ok_or(Error::MissingParentCell {
                    cell,
                    fine: level,
                    coarse: level + 1,
                })?;
        }
        Ok(cell)
    }

    pub(crate) fn from_parts(
        levels: Vec<Partitioning>,
        parent_maps: Vec<HashMap<LocationId, LocationId>>,
    ) -> Self {
        Self {
            levels,
            parent_maps,
        }
    }
}

/// Builds one partitioning per threshold (finest first) and links each fine
/// cell to the finest ancestor-or-self that is a cell of the next coarser
/// level.
pub fn construct_multi(
    forest: &LocationForest,
    samples: &[(GeoCoordinate, AddressVector)],
    taus: &[u64],
    mode: CenterMode,
) -> Result<MultiPartitioning> {
    if taus.is_empty() {
        return Err(Error::EmptyInput("threshold list"));
    }
    for pair in taus.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParameter(format!(
                "thresholds must be strictly increasing fine to coarse, got {} after {}",
                pair[1], pair[0]
            )));
        }
    }

    let levels = taus
        .iter()
        .map(|&tau| construct_partitioning(forest, samples, tau, mode))
        .collect::<Result<Vec<_>>>()?;

    let mut parent_maps = Vec::with_capacity(levels.len().saturating_sub(1));
    for (i, pair) in levels.windows(2).enumerate() {
        let (fine, coarse) = (&pair[0], &pair[1]);
        let mut map = HashMap::with_capacity(fine.len());
        for &cell in fine.cells() {
            let mut candidate = Some(cell);
            let mut hit = None;
            while let Some(loc) = candidate {
                if coarse.contains(loc) {
                    hit = Some(loc);
                    break;
                }
                candidate = forest.parent_of(loc);
            }
            match hit {
                Some(target) => {
                    map.insert(cell, target);
                }
                None => return Err(Error::NoCoarseAncestor { cell, level: i }),
            }
        }
        parent_maps.push(map);
    }

    Ok(MultiPartitioning::from_parts(levels, parent_maps))
}

/// The finest location of the vector that is a cell of the partitioning, or
/// `None` when the sample is unassignable under it.
pub fn assign(address: &AddressVector, partitioning: &Partitioning) -> Option<LocationId> {
    address
        .locations()
        .iter()
        .copied()
        .find(|loc| partitioning.contains(*loc))
}

/// Per-level assignment of one sample against every level of a
/// multi-partitioning.
pub fn assign_multi(address: &AddressVector, mp: &MultiPartitioning) -> Vec<Option<LocationId>> {
    mp.levels()
        .iter()
        .map(|level| assign(address, level))
        .collect()
}

/// Per-sample record of the per-level cells a sample landed in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellAssignment {
    pub sample_id: String,
    pub per_level: Vec<Option<LocationId>>,
}
