use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::FlConfig;
use crate::data::{partition_by_class, LabeledDataset};
use crate::error::{Error, Result};

/// One client's data: sample indices per label into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientShard {
    pub main_labels: Vec<usize>,
    pub indices: Vec<Vec<usize>>,
}

impl ClientShard {
    pub fn owns_main(&self, label: usize) -> bool {
        self.main_labels.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The shard's samples, grouped by label in ascending order.
    pub fn dataset(&self, source: &LabeledDataset) -> LabeledDataset {
        let all: Vec<usize> = self.indices.iter().flatten().copied().collect();
        source.subset(&all)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAllocation {
    pub clients: Vec<ClientShard>,
    pub classes: usize,
    /// Set when some class had to be sampled with replacement.
    pub used_replacement: bool,
}

impl LabelAllocation {
    /// How many of `clients` hold `label` as a main label.
    pub fn main_owners(&self, clients: &[usize], label: usize) -> usize {
        clients
            .iter()
            .filter(|&&c| self.clients[c].owns_main(label))
            .count()
    }
}

/// Draws per-class samples without replacement, falling back to sampling
/// with replacement only when permitted.
struct ClassPools {
    pools: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    allow_replacement: bool,
    used_replacement: bool,
}

impl ClassPools {
    fn new<R: Rng + ?Sized>(data: &LabeledDataset, allow_replacement: bool, rng: &mut R) -> Self {
        let mut pools = partition_by_class(data);
        for pool in &mut pools {
            pool.shuffle(rng);
        }
        let cursors = vec![0; pools.len()];
        Self {
            pools,
            cursors,
            allow_replacement,
            used_replacement: false,
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, label: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        let pool = &self.pools[label];
        let cursor = self.cursors[label];
        let fresh = n.min(pool.len() - cursor);
        let mut out = pool[cursor..cursor + fresh].to_vec();
        self.cursors[label] += fresh;
        if fresh < n {
            if !self.allow_replacement || pool.is_empty() {
                return Err(Error::InsufficientSamples {
                    label,
                    needed: n,
                    available: pool.len() - cursor,
                });
            }
            self.used_replacement = true;
            out.extend((fresh..n).map(|_| pool[rng.random_range(0..pool.len())]));
        }
        Ok(out)
    }
}

/// Gives every client a random set of main labels and draws its samples.
///
/// Each client picks a main-label count uniformly from
/// `main_labels_choices`, then that many distinct labels uniformly. Main
/// labels get `samples_per_main_label` samples each and every other label
/// `samples_per_minor_label`.
pub fn allocate<R: Rng + ?Sized>(
    data: &LabeledDataset,
    cfg: &FlConfig,
    rng: &mut R,
) -> Result<LabelAllocation> {
    let classes = data.classes();
    cfg.validate(classes)?;
    let mut pools = ClassPools::new(data, cfg.allow_replacement, rng);
    let mut clients = Vec::with_capacity(cfg.n_participants);
    for _ in 0..cfg.n_participants {
        let count = cfg.main_labels_choices[rng.random_range(0..cfg.main_labels_choices.len())];
        let mut main_labels = index::sample(rng, classes, count).into_vec();
        main_labels.sort_unstable();
        let mut indices = Vec::with_capacity(classes);
        for label in 0..classes {
            let n = if main_labels.binary_search(&label).is_ok() {
                cfg.samples_per_main_label
            } else {
                cfg.samples_per_minor_label
            };
            indices.push(pools.draw(label, n, rng)?);
        }
        clients.push(ClientShard {
            main_labels,
            indices,
        });
    }
    Ok(LabelAllocation {
        clients,
        classes,
        used_replacement: pools.used_replacement,
    })
}

/// Labels split into groups whose members share a per-label sample count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedComposition {
    /// Each group sorted; groups ordered by their smallest label.
    pub groups: Vec<Vec<usize>>,
    pub per_label: Vec<usize>,
}

/// Splits `classes` labels at random into three near-equal groups holding
/// `q`, `q/4` and `q/5` samples per label.
pub fn plant_groups<R: Rng + ?Sized>(classes: usize, q: usize, rng: &mut R) -> Result<PlantedComposition> {
    if classes < 3 {
        return Err(Error::InvalidArgument("planting three groups needs >= 3 labels".into()));
    }
    if q < 5 {
        return Err(Error::InvalidArgument("q must be >= 5 so every group is non-empty".into()));
    }
    let counts = [q, q / 4, q / 5];
    let mut labels: Vec<usize> = (0..classes).collect();
    labels.shuffle(rng);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); 3];
    let mut per_label = vec![0; classes];
    for (i, &label) in labels.iter().enumerate() {
        groups[i % 3].push(label);
        per_label[label] = counts[i % 3];
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    Ok(PlantedComposition { groups, per_label })
}

/// Deals the planted per-label samples round-robin over a random order, so
/// every client gets an IID share of the imbalanced training set. A client's
/// main labels are the labels it holds at least one sample of.
pub fn allocate_planted<R: Rng + ?Sized>(
    data: &LabeledDataset,
    composition: &PlantedComposition,
    n_participants: usize,
    allow_replacement: bool,
    rng: &mut R,
) -> Result<LabelAllocation> {
    let classes = data.classes();
    if composition.per_label.len() != classes {
        return Err(Error::shape("planted labels", classes, composition.per_label.len()));
    }
    if n_participants == 0 {
        return Err(Error::InvalidArgument("n_participants must be >= 1".into()));
    }
    let mut pools = ClassPools::new(data, allow_replacement, rng);
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for (label, &n) in composition.per_label.iter().enumerate() {
        chosen.extend(pools.draw(label, n, rng)?.into_iter().map(|i| (label, i)));
    }
    if chosen.len() < n_participants {
        return Err(Error::InvalidArgument(format!(
            "{} planted samples cannot cover {n_participants} clients",
            chosen.len()
        )));
    }
    chosen.shuffle(rng);
    let mut clients = vec![
        ClientShard {
            main_labels: Vec::new(),
            indices: vec![Vec::new(); classes],
        };
        n_participants
    ];
    for (i, (label, sample)) in chosen.into_iter().enumerate() {
        clients[i % n_participants].indices[label].push(sample);
    }
    for client in &mut clients {
        client.main_labels = (0..classes)
            .filter(|&l| !client.indices[l].is_empty())
            .collect();
    }
    Ok(LabelAllocation {
        clients,
        classes,
        used_replacement: pools.used_replacement,
    })
}
