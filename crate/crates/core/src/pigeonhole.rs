//! Monochromatic subtrees of vertex colorings.
//!
//! [`php_find`] follows the inductive argument on budget vectors: look at the
//! root color `c`; if its budget is spent the root alone is the answer,
//! otherwise spend one unit of `c` and recurse into the children. A child
//! answer in another color is returned as is; two answers in color `c` are
//! joined under the root.

use crate::coloring::Coloring;
use crate::error::{Error, Result};
use crate::tree::{heap_depth, join_heaps, Embeddings, HostTree, SubtreeEmbedding, VertexPath, View};

/// A monochromatic complete subtree, vertices in heap order in the frame of the view it was found in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoTree {
    pub color: u32,
    pub depth: u32,
    pub heap: Vec<VertexPath>,
}

impl MonoTree {
    pub fn into_embedding(self, level_aligned: bool) -> SubtreeEmbedding {
        SubtreeEmbedding::new(self.depth, self.heap, level_aligned)
    }
}

/// Brings a budget vector up to sum `n` by adding the slack to the first largest entry.
pub fn pad_budgets(budgets: &[u32], n: u32) -> Result<Vec<u32>> {
    if budgets.is_empty() {
        return Err(Error::domain("need at least one color budget"));
    }
    let sum: u64 = budgets.iter().map(|&a| a as u64).sum();
    if sum > n as u64 {
        return Err(Error::InsufficientDepth {
            needed: sum,
            available: n as u64,
        });
    }
    let mut out = budgets.to_vec();
    let max = *out.iter().max().expect("nonempty");
    let i = out.iter().position(|&a| a == max).expect("max exists");
    out[i] += n - sum as u32;
    Ok(out)
}

/// Budgets `d` for each of `k` colors, padded to sum `n`.
pub fn uniform_budgets(d: u32, k: usize, n: u32) -> Result<Vec<u32>> {
    pad_budgets(&vec![d; k], n)
}

/// Pigeonhole inside a view. `color` sees frame vertices and must return ids below `budgets.len()`.
pub fn php_view<F>(view: &View, budgets: &[u32], mut color: F) -> Result<MonoTree>
where
    F: FnMut(&VertexPath) -> Result<u32>,
{
    let mut a = pad_budgets(budgets, view.depth())?;
    let (c, heap) = recurse(view, VertexPath::root(), &mut a, &mut color)?;
    let depth = heap_depth(heap.len());
    Ok(MonoTree {
        color: c,
        depth,
        heap: view.map_all(&heap),
    })
}

fn recurse<F>(view: &View, q: VertexPath, a: &mut [u32], color: &mut F) -> Result<(u32, Vec<VertexPath>)>
where
    F: FnMut(&VertexPath) -> Result<u32>,
{
    let c = color(&view.map(&q))?;
    let ci = c as usize;
    if ci >= a.len() {
        return Err(Error::domain(format!(
            "vertex color {c} has no budget ({} colors)",
            a.len()
        )));
    }
    if a[ci] == 0 {
        return Ok((c, vec![q]));
    }
    a[ci] -= 1;
    let result = (|| {
        let (c1, h1) = recurse(view, q.child(false), a, color)?;
        if c1 != c {
            return Ok((c1, h1));
        }
        let (c2, h2) = recurse(view, q.child(true), a, color)?;
        if c2 != c {
            return Ok((c2, h2));
        }
        Ok((c, join_heaps(q.clone(), &h1, &h2)))
    })();
    a[ci] += 1;
    result
}

fn vertex_color(vc: &Coloring) -> Result<impl Fn(&VertexPath) -> Result<u32> + '_> {
    if vc.arity != 1 || vc.scope.is_cross() {
        return Err(Error::domain("pigeonhole needs a vertex coloring"));
    }
    Ok(move |v: &VertexPath| vc.color_of(std::slice::from_ref(v)))
}

/// A subtree of depth exactly `budgets[i]` colored `i`, for some `i`.
pub fn php_find(host: HostTree, vc: &Coloring, budgets: &[u32]) -> Result<(u32, SubtreeEmbedding)> {
    if budgets.len() < vc.colors as usize {
        return Err(Error::domain(format!(
            "{} budgets for {} colors",
            budgets.len(),
            vc.colors
        )));
    }
    let color = vertex_color(vc)?;
    let m = php_view(&View::host(host.depth), budgets, color)?;
    Ok((m.color, m.into_embedding(false)))
}

/// A monochromatic subtree of depth `d`; needs `host.depth >= d*k`.
pub fn php_find_uniform(host: HostTree, vc: &Coloring, d: u32, k: usize) -> Result<(u32, SubtreeEmbedding)> {
    let needed = d as u64 * k as u64;
    if needed > host.depth as u64 {
        return Err(Error::InsufficientDepth {
            needed,
            available: host.depth as u64,
        });
    }
    let (c, e) = php_find(host, vc, &vec![d; k])?;
    let top = e.vertices[..crate::tree::heap_len(d)].to_vec();
    Ok((c, SubtreeEmbedding::new(d, top, false)))
}

/// Lexicographically least monochromatic level-aligned subtree of depth `d` inside a view.
pub fn level_aligned_view<F>(view: &View, d: u32, color: &F) -> Result<Option<MonoTree>>
where
    F: Fn(&VertexPath) -> Result<u32> + Sync,
{
    let mut err = None;
    let found = {
        let err = &mut err;
        let mut first: Option<u32> = None;
        let mut search = Embeddings::new(view.depth(), d, true).with_prune(move |partial: &[VertexPath]| {
            let c = match color(&view.map(partial.last().expect("nonempty"))) {
                Ok(c) => c,
                Err(e) => {
                    *err = Some(e);
                    return false;
                }
            };
            if partial.len() == 1 {
                first = Some(c);
                true
            } else {
                first == Some(c)
            }
        });
        search.next()
    };
    if let Some(e) = err {
        return Err(e);
    }
    match found {
        None => Ok(None),
        Some(heap) => {
            let heap = view.map_all(&heap);
            Ok(Some(MonoTree {
                color: color(&heap[0])?,
                depth: d,
                heap,
            }))
        }
    }
}

/// Exhaustive search for a monochromatic level-aligned subtree of depth `d`.
pub fn php_level_aligned_bruteforce(
    host: HostTree,
    vc: &Coloring,
    d: u32,
    k: usize,
) -> Result<Option<(u32, SubtreeEmbedding)>> {
    let color = vertex_color(vc)?;
    let out = level_aligned_view(&View::host(host.depth), d, &color)?.map(|m| (m.color, m.into_embedding(true)));
    if k >= 2 && d >= 1 {
        let promise = 5.0 * d as f64 * k as f64 * (k as f64).log2();
        debug_assert!(
            out.is_some() || (host.depth as f64) < promise,
            "level-aligned pigeonhole promise broken"
        );
    }
    Ok(out)
}
