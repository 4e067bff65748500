//! Edge colourings of complete graphs, the `.rcg` text format, and generators.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::vertex_set::VertexSet;

/// Largest supported colour count.
pub const MAX_COLOURS: usize = 64;

/// An `r`-colouring of the edges of `K_n`.
///
/// Each unordered pair is stored once (upper triangle, row-major). The colour
/// classes are also cached as `r * n` neighbourhood bitsets, since almost all
/// of the work downstream is codegree counting.
#[derive(Clone, PartialEq, Eq)]
pub struct EdgeColouring {
    n: usize,
    r: usize,
    colours: Vec<u8>,
    nbhd: Vec<VertexSet>,
}

#[inline]
fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * n - u * (u + 1) / 2 + (v - u - 1)
}

impl EdgeColouring {
    /// Builds a colouring from a colour function on pairs `u < v`.
    pub fn from_fn(n: usize, r: usize, mut f: impl FnMut(usize, usize) -> usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("colouring needs n >= 1".into()));
        }
        if r == 0 || r > MAX_COLOURS {
            return Err(Error::InvalidInput(format!(
                "colour count must be in 1..={MAX_COLOURS}, got {r}"
            )));
        }
        let mut colours = Vec::with_capacity(n * (n - 1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                let c = f(u, v);
                if c >= r {
                    return Err(Error::InvalidColour { colour: c, r });
                }
                colours.push(c as u8);
            }
        }
        Ok(Self::from_parts(n, r, colours))
    }

    fn from_parts(n: usize, r: usize, colours: Vec<u8>) -> Self {
        let mut nbhd = vec![VertexSet::empty(n); r * n];
        let mut k = 0;
        for u in 0..n {
            for v in u + 1..n {
                let c = colours[k] as usize;
                nbhd[c * n + u].insert(v);
                nbhd[c * n + v].insert(u);
                k += 1;
            }
        }
        EdgeColouring { n, r, colours, nbhd }
    }

    /// Every edge gets colour `colour`.
    pub fn monochromatic(n: usize, r: usize, colour: usize) -> Result<Self> {
        Self::from_fn(n, r, |_, _| colour)
    }

    /// The pentagon fixture: cycle edges `{i, i+1 mod 5}` colour 0, diagonals colour 1.
    pub fn pentagon() -> Self {
        Self::from_fn(5, 2, |u, v| if (v - u) % 5 == 1 || (v - u) % 5 == 4 { 0 } else { 1 })
            .expect("fixture is well formed")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    /// Colour of the edge `{u, v}`.
    pub fn colour(&self, u: usize, v: usize) -> Result<usize> {
        if u == v || u >= self.n || v >= self.n {
            return Err(Error::InvalidPair(u, v));
        }
        Ok(self.colour_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn colour_unchecked(&self, u: usize, v: usize) -> usize {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.colours[pair_index(self.n, a, b)] as usize
    }

    /// `N_i(v)`: vertices joined to `v` in colour `i`.
    pub fn neighbourhood(&self, v: usize, i: usize) -> Result<&VertexSet> {
        if v >= self.n {
            return Err(Error::InvalidVertex { vertex: v, n: self.n });
        }
        if i >= self.r {
            return Err(Error::InvalidColour { colour: i, r: self.r });
        }
        Ok(self.nbhd_unchecked(v, i))
    }

    #[inline]
    pub(crate) fn nbhd_unchecked(&self, v: usize, i: usize) -> &VertexSet {
        &self.nbhd[i * self.n + v]
    }

    /// True iff every pair inside `s` has colour `i`; vacuous for `|s| <= 1`.
    pub fn is_mono_clique(&self, s: &VertexSet, i: usize) -> bool {
        if i >= self.r {
            return s.len() <= 1;
        }
        s.iter().all(|u| {
            let mut rest = s.clone();
            rest.remove(u);
            rest.is_subset(self.nbhd_unchecked(u, i))
        })
    }

    /// True iff `(spine, pages)` is a monochromatic book in colour `i`: the spine
    /// is a colour-`i` clique and every spine-page edge has colour `i`.
    pub fn is_mono_book(&self, spine: &VertexSet, pages: &VertexSet, i: usize) -> Result<bool> {
        if !spine.is_disjoint(pages) {
            return Err(Error::InvalidBook);
        }
        if spine.is_empty() {
            return Ok(true);
        }
        if !self.is_mono_clique(spine, i) {
            return Ok(false);
        }
        Ok(spine.iter().all(|u| pages.is_subset(self.nbhd_unchecked(u, i))))
    }

    /// Upper-triangle colour list in row-major order.
    pub fn upper_triangle(&self) -> &[u8] {
        &self.colours
    }

    /// Serialises to the `.rcg` text format.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.colours.len() * 3 + 16);
        writeln!(out, "{} {}", self.n, self.r).unwrap();
        let mut k = 0;
        for u in 0..self.n.saturating_sub(1) {
            let len = self.n - 1 - u;
            for (j, c) in self.colours[k..k + len].iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{c}").unwrap();
            }
            out.push('\n');
            k += len;
        }
        out
    }

    /// Parses the `.rcg` text format.
    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse { line, message };
        if !text.ends_with('\n') {
            return Err(perr(text.lines().count().max(1), "missing trailing newline".into()));
        }
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| perr(1, "empty input".into()))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 2 {
            return Err(perr(1, format!("expected header \"n r\", got {header:?}")));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| perr(1, format!("bad vertex count {:?}", fields[0])))?;
        let r: usize = fields[1]
            .parse()
            .map_err(|_| perr(1, format!("bad colour count {:?}", fields[1])))?;
        if n == 0 || r == 0 || r > MAX_COLOURS {
            return Err(perr(1, format!("need n >= 1 and 1 <= r <= {MAX_COLOURS}")));
        }
        let mut colours = Vec::with_capacity(n * (n - 1) / 2);
        for u in 0..n - 1 {
            let line_no = u + 2;
            let line = lines
                .next()
                .ok_or_else(|| perr(line_no, format!("missing row for vertex {u}")))?;
            let expected = n - 1 - u;
            let mut count = 0;
            for tok in line.split(' ') {
                let c: usize = tok.parse().map_err(|_| perr(line_no, format!("bad colour {tok:?}")))?;
                if c >= r {
                    return Err(perr(line_no, format!("colour {c} out of range for r = {r}")));
                }
                colours.push(c as u8);
                count += 1;
            }
            if count != expected {
                return Err(perr(
                    line_no,
                    format!("row {u} has {count} entries, expected {expected}"),
                ));
            }
        }
        if lines.next().is_some() {
            return Err(perr(n + 1, "trailing content after last row".into()));
        }
        Ok(Self::from_parts(n, r, colours))
    }

    /// SHA-256 of the serialised form, lowercase hex.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }
}

impl std::fmt::Debug for EdgeColouring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EdgeColouring(n={}, r={})", self.n, self.r)
    }
}

/// Uniform i.i.d. colouring, reproducible from `seed` (ChaCha8 stream).
pub fn random_colouring(n: usize, r: usize, seed: u64) -> Result<EdgeColouring> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r32 = u32::try_from(r).map_err(|_| Error::InvalidInput("too many colours".into()))?;
    EdgeColouring::from_fn(n, r, |_, _| rng.gen_range(0..r32.max(1)) as usize)
}

/// Product colouring on pairs `(a, b)`, vertex label `a * n2 + b`.
///
/// Edges differing in the first coordinate take their colour from `c1`; the
/// rest take `r1 +` their colour in `c2`.
pub fn product_colouring(c1: &EdgeColouring, c2: &EdgeColouring) -> Result<EdgeColouring> {
    let (n2, r1) = (c2.n, c1.r);
    EdgeColouring::from_fn(c1.n * n2, c1.r + c2.r, |x, y| {
        let (a, b) = (x / n2, x % n2);
        let (a2, b2) = (y / n2, y % n2);
        if a != a2 {
            c1.colour_unchecked(a, a2)
        } else {
            r1 + c2.colour_unchecked(b, b2)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(n: usize, vs: &[usize]) -> VertexSet {
        VertexSet::from_vertices(n, vs.iter().copied())
    }

    #[test]
    fn pentagon_colours() {
        let c5 = EdgeColouring::pentagon();
        assert_eq!(c5.colour(0, 1), Ok(0));
        assert_eq!(c5.colour(0, 2), Ok(1));
        assert_eq!(c5.colour(4, 0), Ok(0));
        assert_eq!(c5.colour(3, 3), Err(Error::InvalidPair(3, 3)));
        assert_eq!(c5.colour(0, 5), Err(Error::InvalidPair(0, 5)));
    }

    #[test]
    fn pentagon_neighbourhoods() {
        let c5 = EdgeColouring::pentagon();
        assert_eq!(c5.neighbourhood(0, 0).unwrap().to_vec(), vec![1, 4]);
        assert_eq!(c5.neighbourhood(0, 1).unwrap().to_vec(), vec![2, 3]);
        assert!(matches!(c5.neighbourhood(5, 0), Err(Error::InvalidVertex { .. })));
        assert!(matches!(c5.neighbourhood(0, 2), Err(Error::InvalidColour { .. })));
        let single = EdgeColouring::monochromatic(1, 3, 0).unwrap();
        for i in 0..3 {
            assert!(single.neighbourhood(0, i).unwrap().is_empty());
        }
    }

    #[test]
    fn cliques_and_books() {
        let c5 = EdgeColouring::pentagon();
        assert!(c5.is_mono_clique(&set(5, &[0, 1]), 0));
        assert!(!c5.is_mono_clique(&set(5, &[0, 1, 2]), 0));
        assert!(c5.is_mono_clique(&VertexSet::empty(5), 1));
        assert_eq!(c5.is_mono_book(&set(5, &[0]), &set(5, &[1, 4]), 0), Ok(true));
        assert_eq!(c5.is_mono_book(&set(5, &[0]), &set(5, &[1, 2]), 0), Ok(false));
        assert_eq!(c5.is_mono_book(&VertexSet::empty(5), &set(5, &[1, 2, 3]), 0), Ok(true));
        assert_eq!(
            c5.is_mono_book(&set(5, &[0]), &set(5, &[0, 1]), 0),
            Err(Error::InvalidBook)
        );
    }

    #[test]
    fn random_generator() {
        let one = random_colouring(2, 1, 99).unwrap();
        assert_eq!(one.colour(0, 1), Ok(0));
        assert_eq!(random_colouring(5, 2, 7).unwrap(), random_colouring(5, 2, 7).unwrap());
        let c = random_colouring(40, 2, 12345).unwrap();
        let zeros = c.upper_triangle().iter().filter(|&&x| x == 0).count();
        let frac = zeros as f64 / c.upper_triangle().len() as f64;
        assert!((frac - 0.5).abs() <= 0.1, "colour-0 fraction {frac}");
    }

    #[test]
    fn product_of_single_edges() {
        let e = EdgeColouring::monochromatic(2, 1, 0).unwrap();
        let p = product_colouring(&e, &e).unwrap();
        assert_eq!((p.n(), p.r()), (4, 2));
        // max monochromatic clique is 2 in each colour: no triangle is monochromatic
        for a in 0..4 {
            for b in a + 1..4 {
                for c in b + 1..4 {
                    let s = set(4, &[a, b, c]);
                    assert!(!p.is_mono_clique(&s, 0) && !p.is_mono_clique(&s, 1));
                }
            }
        }
        assert!(p.is_mono_clique(&set(4, &[0, 2]), 0));
        assert!(p.is_mono_clique(&set(4, &[0, 1]), 1));
    }

    #[test]
    fn product_with_trivial_factor_relabels() {
        let c5 = EdgeColouring::pentagon();
        let one = EdgeColouring::monochromatic(1, 1, 0).unwrap();
        let p = product_colouring(&c5, &one).unwrap();
        assert_eq!((p.n(), p.r()), (5, 3));
        for u in 0..5 {
            for v in u + 1..5 {
                assert_eq!(p.colour(u, v), c5.colour(u, v));
            }
        }
    }

    #[test]
    fn pentagon_squared_has_no_triangle_in_first_colours() {
        let c5 = EdgeColouring::pentagon();
        let p = product_colouring(&c5, &c5).unwrap();
        assert_eq!((p.n(), p.r()), (25, 4));
        for a in 0..25 {
            for b in a + 1..25 {
                for c in b + 1..25 {
                    let s = set(25, &[a, b, c]);
                    assert!(!p.is_mono_clique(&s, 0) && !p.is_mono_clique(&s, 1));
                }
            }
        }
    }

    #[test]
    fn text_format() {
        let c5 = EdgeColouring::pentagon();
        let text = c5.serialize();
        assert!(text.starts_with("5 2\n0 1 1 0\n"), "{text}");
        assert_eq!(EdgeColouring::parse(&text).unwrap(), c5);
        let e = EdgeColouring::parse("2 1\n0\n").unwrap();
        assert_eq!(e.colour(0, 1), Ok(0));
        assert_eq!(EdgeColouring::parse("1 3\n").unwrap().n(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let line_of = |s: &str| match EdgeColouring::parse(s) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of("2 1\n5\n"), 2);
        assert_eq!(line_of("2 1\n0"), 2);
        assert_eq!(line_of("x 1\n0\n"), 1);
        assert_eq!(line_of("3 2\n0 1\n0 1\n"), 3);
        assert_eq!(line_of("3 2\n0\n1\n"), 2);
        assert_eq!(line_of("3 2\n0 1\n"), 3);
        assert_eq!(line_of("2 1\n0\n0\n"), 3);
    }

    proptest! {
        #[test]
        fn round_trip_and_partition(n in 1usize..40, r in 1usize..5, seed in any::<u64>()) {
            let c = random_colouring(n, r, seed).unwrap();
            prop_assert_eq!(&EdgeColouring::parse(&c.serialize()).unwrap(), &c);
            for v in 0..n {
                let mut seen = VertexSet::empty(n);
                let mut total = 0;
                for i in 0..r {
                    let nb = c.neighbourhood(v, i).unwrap();
                    prop_assert!(nb.is_disjoint(&seen));
                    seen = seen.union(nb);
                    total += nb.len();
                }
                prop_assert_eq!(total, n - 1);
                prop_assert!(!seen.contains(v));
            }
            for u in 0..n {
                for v in 0..n {
                    if u != v {
                        prop_assert_eq!(c.colour(u, v), c.colour(v, u));
                        let col = c.colour(u, v).unwrap();
                        prop_assert!(c.neighbourhood(u, col).unwrap().contains(v));
                    }
                }
            }
        }
    }
}
