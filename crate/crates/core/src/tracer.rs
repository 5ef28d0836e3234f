//! Boundary tracing of the fattened surface of a partial chord diagram.
//!
//! Every backbone is thickened to a rectangle whose boundary consists of top
//! arcs (between consecutive chord ends, carrying the marked points) and one
//! underside arc (length 1) running from the right end around the bottom to
//! the left end. Every chord is a band contributing two sides of length 1.
//! The boundary of the surface is obtained by gluing the endpoints of all
//! these segments; each resulting cycle is one boundary component.
//!
//! An untwisted band from `v` to a later vertex `w` joins the left side of `v`
//! to the right side of `w` (outer side) and the right side of `v` to the
//! left side of `w` (inner side). A twisted band joins left to left and right
//! to right.

use std::fmt;

use crate::error::TraceError;
use crate::spectra::{BackboneSpectrum, BoundaryClass, CyclicPolicy, DiagramClass, LengthPointSpectrum, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Marked,
    ChordEnd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexRef {
    pub backbone: usize,
    pub index: usize,
}

impl VertexRef {
    pub fn new(backbone: usize, index: usize) -> Self {
        VertexRef { backbone, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chord {
    pub a: VertexRef,
    pub b: VertexRef,
    pub twisted: bool,
}

/// A concrete partial chord diagram with linearly ordered backbones.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagram {
    pub mode: Mode,
    pub backbones: Vec<Vec<Role>>,
    pub chords: Vec<Chord>,
}

impl Diagram {
    /// Builds a diagram from backbone sizes and chord endpoint pairs; every
    /// vertex not named by a chord is marked. Chord ids follow `pairs` order.
    pub fn from_pairs(
        mode: Mode,
        sizes: &[usize],
        pairs: &[(VertexRef, VertexRef, bool)],
    ) -> Result<Self, TraceError> {
        let mut backbones: Vec<Vec<Role>> = sizes.iter().map(|&n| vec![Role::Marked; n]).collect();
        let mut chords = Vec::with_capacity(pairs.len());
        for (id, &(a, b, twisted)) in pairs.iter().enumerate() {
            for v in [a, b] {
                let slot = backbones
                    .get_mut(v.backbone)
                    .and_then(|bb| bb.get_mut(v.index))
                    .ok_or(TraceError::DanglingChord { chord: id })?;
                if *slot != Role::Marked {
                    return Err(TraceError::DanglingChord { chord: id });
                }
                *slot = Role::ChordEnd(id);
            }
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            chords.push(Chord { a, b, twisted });
        }
        let d = Diagram { mode, backbones, chords };
        d.check()?;
        Ok(d)
    }

    /// Single backbone of `n` vertices with untwisted chords on the given
    /// (0-based) vertex pairs.
    pub fn on_one_backbone(mode: Mode, n: usize, pairs: &[(usize, usize)]) -> Result<Self, TraceError> {
        let pairs: Vec<_> = pairs
            .iter()
            .map(|&(a, b)| (VertexRef::new(0, a), VertexRef::new(0, b), false))
            .collect();
        Diagram::from_pairs(mode, &[n], &pairs)
    }

    /// Verifies chord incidence and the no-twist rule of oriented mode.
    pub fn check(&self) -> Result<(), TraceError> {
        let mut seen = vec![0u8; self.chords.len()];
        for (j, bb) in self.backbones.iter().enumerate() {
            for (i, role) in bb.iter().enumerate() {
                if let Role::ChordEnd(c) = *role {
                    let chord = self.chords.get(c).ok_or(TraceError::DanglingChord { chord: c })?;
                    let here = VertexRef::new(j, i);
                    if chord.a != here && chord.b != here {
                        return Err(TraceError::DanglingChord { chord: c });
                    }
                    seen[c] += 1;
                }
            }
        }
        for (c, chord) in self.chords.iter().enumerate() {
            if seen[c] != 2 || chord.a == chord.b {
                return Err(TraceError::DanglingChord { chord: c });
            }
            if chord.twisted && self.mode == Mode::Oriented {
                return Err(TraceError::TwistInOrientedMode { chord: c });
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.backbones.iter().map(Vec::len).collect()
    }

    pub fn backbone_spectrum(&self) -> BackboneSpectrum {
        BackboneSpectrum::from_sizes(&self.sizes())
    }

    pub fn marked_points(&self) -> usize {
        self.backbones.iter().flatten().filter(|r| **r == Role::Marked).count()
    }

    /// Connected components of the graph on backbones whose edges are the
    /// chords joining distinct backbones.
    pub fn piece_count(&self) -> usize {
        let n = self.backbones.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut pieces = n;
        for chord in &self.chords {
            let ra = find(&mut parent, chord.a.backbone);
            let rb = find(&mut parent, chord.b.backbone);
            if ra != rb {
                parent[ra] = rb;
                pieces -= 1;
            }
        }
        pieces
    }

    /// The diagram read right to left: backbone order and the vertex order on
    /// each backbone are reversed.
    pub fn mirrored(&self) -> Diagram {
        let nb = self.backbones.len();
        let flip = |v: VertexRef| {
            let len = self.backbones[v.backbone].len();
            VertexRef::new(nb - 1 - v.backbone, len - 1 - v.index)
        };
        let backbones = self.backbones.iter().rev().map(|bb| bb.iter().rev().copied().collect()).collect();
        let chords = self
            .chords
            .iter()
            .map(|c| {
                let (a, b) = (flip(c.a), flip(c.b));
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                Chord { a, b, twisted: c.twisted }
            })
            .collect();
        Diagram { mode: self.mode, backbones, chords }
    }
}

/// Side of a chord band: `Plus` is the outer side of an untwisted band (the
/// left-to-left side of a twisted one), `Minus` the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LengthElement {
    ChordSide { chord: usize, side: Side },
    Underside { backbone: usize },
}

impl fmt::Display for LengthElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthElement::ChordSide { chord, side: Side::Plus } => write!(f, "C{chord}+"),
            LengthElement::ChordSide { chord, side: Side::Minus } => write!(f, "C{chord}-"),
            LengthElement::Underside { backbone } => write!(f, "U{backbone}"),
        }
    }
}

/// One boundary cycle: each step is a marked-point cluster followed by the
/// length element that ends it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryComponent {
    pub steps: Vec<(u32, LengthElement)>,
}

impl BoundaryComponent {
    /// Boundary length `K`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clusters(&self) -> Vec<u32> {
        self.steps.iter().map(|&(c, _)| c).collect()
    }

    pub fn class(&self, policy: CyclicPolicy) -> Result<BoundaryClass, TraceError> {
        Ok(BoundaryClass::canonicalize(&self.clusters(), policy)?)
    }
}

impl fmt::Display for BoundaryComponent {
    /// `[2] C1+ [0] U0`: cluster sizes in brackets, then the element ending each cluster.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (cluster, element)) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "[{cluster}] {element}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    Arc { marked: u32 },
    Element(LengthElement),
}

/// Endpoint `end` (0 = left/first, 1 = right/second) of segment `seg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Port {
    seg: usize,
    end: usize,
}

struct Ribbon {
    segments: Vec<Segment>,
    glue: Vec<[Option<Port>; 2]>,
    arc_count: usize,
}

impl Ribbon {
    fn build(d: &Diagram) -> Ribbon {
        let mut segments = Vec::new();
        // arc_left[j][i]: for chord-end vertex i on backbone j, the arc ending just left of it.
        let mut arc_left: Vec<Vec<usize>> = Vec::with_capacity(d.backbones.len());
        let mut first_last = Vec::with_capacity(d.backbones.len());
        for bb in &d.backbones {
            let first = segments.len();
            let mut lefts = vec![usize::MAX; bb.len()];
            let mut marked = 0u32;
            for (i, role) in bb.iter().enumerate() {
                match role {
                    Role::Marked => marked += 1,
                    Role::ChordEnd(_) => {
                        lefts[i] = segments.len();
                        segments.push(Segment::Arc { marked });
                        marked = 0;
                    }
                }
            }
            segments.push(Segment::Arc { marked });
            first_last.push((first, segments.len() - 1));
            arc_left.push(lefts);
        }
        let arc_count = segments.len();
        let mut glue: Vec<[Option<Port>; 2]> = vec![[None, None]; arc_count];
        let push = |segments: &mut Vec<Segment>, glue: &mut Vec<[Option<Port>; 2]>, el, p0: Port, p1: Port| {
            let seg = segments.len();
            segments.push(Segment::Element(el));
            glue.push([Some(p0), Some(p1)]);
            glue[p0.seg][p0.end] = Some(Port { seg, end: 0 });
            glue[p1.seg][p1.end] = Some(Port { seg, end: 1 });
        };
        for (j, &(first, last)) in first_last.iter().enumerate() {
            push(
                &mut segments,
                &mut glue,
                LengthElement::Underside { backbone: j },
                Port { seg: last, end: 1 },
                Port { seg: first, end: 0 },
            );
        }
        for (c, chord) in d.chords.iter().enumerate() {
            let left_of = |v: VertexRef| Port { seg: arc_left[v.backbone][v.index], end: 1 };
            let right_of = |v: VertexRef| Port { seg: arc_left[v.backbone][v.index] + 1, end: 0 };
            let (plus, minus) = if chord.twisted {
                ((left_of(chord.a), left_of(chord.b)), (right_of(chord.a), right_of(chord.b)))
            } else {
                ((left_of(chord.a), right_of(chord.b)), (right_of(chord.a), left_of(chord.b)))
            };
            push(&mut segments, &mut glue, LengthElement::ChordSide { chord: c, side: Side::Plus }, plus.0, plus.1);
            push(&mut segments, &mut glue, LengthElement::ChordSide { chord: c, side: Side::Minus }, minus.0, minus.1);
        }
        Ribbon { segments, glue, arc_count }
    }

    fn partner(&self, p: Port) -> Port {
        self.glue[p.seg][p.end].expect("every segment endpoint is glued")
    }
}

/// Boundary components of the surface of `d`, sorted by canonical class and
/// then by walk text.
pub fn trace(d: &Diagram) -> Result<Vec<BoundaryComponent>, TraceError> {
    d.check()?;
    let ribbon = Ribbon::build(d);
    let mut visited = vec![false; ribbon.arc_count];
    let mut out = Vec::new();
    for start in 0..ribbon.arc_count {
        if visited[start] {
            continue;
        }
        let mut steps = Vec::new();
        let mut at = Port { seg: start, end: 0 };
        loop {
            visited[at.seg] = true;
            let Segment::Arc { marked } = ribbon.segments[at.seg] else {
                unreachable!("walk alternates arcs and length elements")
            };
            let element_in = ribbon.partner(Port { seg: at.seg, end: 1 - at.end });
            let Segment::Element(element) = ribbon.segments[element_in.seg] else {
                unreachable!("arcs are glued to length elements only")
            };
            steps.push((marked, element));
            at = ribbon.partner(Port { seg: element_in.seg, end: 1 - element_in.end });
            if at.seg == start {
                break;
            }
        }
        out.push(BoundaryComponent { steps });
    }
    let mut keyed: Vec<(Vec<u32>, String, BoundaryComponent)> = out
        .into_iter()
        .map(|c| {
            let rep = BoundaryClass::canonicalize(&c.clusters(), CyclicPolicy::RotationOnly)
                .expect("components are nonempty")
                .rep()
                .to_vec();
            (rep, c.to_string(), c)
        })
        .collect();
    keyed.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    Ok(keyed.into_iter().map(|(_, _, c)| c).collect())
}

/// Full type of `d`: spectrum from [`trace`], Euler index from the Euler relation.
pub fn classify(d: &Diagram, policy: CyclicPolicy) -> Result<DiagramClass, TraceError> {
    let components = trace(d)?;
    let mut spectrum = LengthPointSpectrum::new(policy);
    for comp in &components {
        spectrum.add(&comp.class(policy)?, 1)?;
    }
    let b = d.backbones.len() as i64;
    let k = d.chords.len() as i64;
    let n = components.len() as i64;
    let pieces = d.piece_count() as i64;
    let defect = 2 * pieces - b + k - n;
    let euler = match d.mode {
        Mode::Oriented => {
            if defect % 2 != 0 {
                return Err(TraceError::NonIntegerGenus { defect });
            }
            defect / 2
        }
        Mode::NonOriented => defect,
    };
    if euler < 0 {
        return Err(TraceError::NegativeEulerIndex(euler));
    }
    Ok(DiagramClass {
        mode: d.mode,
        euler_index: euler as u32,
        pieces: pieces as u32,
        k: k as u32,
        l: d.marked_points() as u32,
        backbones: d.backbone_spectrum(),
        spectrum,
    })
}
