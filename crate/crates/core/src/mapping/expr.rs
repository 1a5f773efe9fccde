use std::fmt;
use std::sync::Arc;

use crate::contraction::{certify_star_contraction, ContractionCertificate};
use crate::error::{Error, Result};
use crate::geometry::{distance, geodesic_point, norm3, rotate_about, Curvature, ModelPoint};
use crate::mapping::domain::{Domain, DomainKind};

/// Closed-form one-dimensional maps of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analytic1d {
    /// `x - x^2 / 2`: nonexpansive, contractive in the sense of Rakotch with
    /// modulus `1 - t / 2`, but with Lipschitz constant one at the origin.
    XMinusHalfXSquared,
}

impl Analytic1d {
    pub fn name(self) -> &'static str {
        match self {
            Analytic1d::XMinusHalfXSquared => "x_minus_half_x_squared",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Analytic1d::XMinusHalfXSquared => x - 0.5 * x * x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Identity,
    Constant(ModelPoint),
    Rotation { axis: ModelPoint, angle: f64 },
    StarContraction {
        center: ModelPoint,
        certificate: ContractionCertificate,
    },
    /// `outer` after `inner`.
    Compose(Box<Node>, Box<Node>),
    Analytic1d(Analytic1d),
}

/// A nonexpansive self-map of a [`Domain`], kept as an expression tree.
///
/// Every constructor checks that the map sends its domain into itself with
/// Lipschitz constant at most one, so evaluation on members never fails.
#[derive(Debug, Clone, PartialEq)]
pub struct MapExpr {
    domain: Arc<Domain>,
    node: Node,
}

const AXIS_TOL: f64 = 1e-12;

impl MapExpr {
    pub fn identity(domain: &Domain) -> MapExpr {
        MapExpr {
            domain: Arc::new(domain.clone()),
            node: Node::Identity,
        }
    }

    pub fn constant(domain: &Domain, q: ModelPoint) -> Result<MapExpr> {
        if !domain.contains(&q) {
            return Err(Error::OutsideDomain);
        }
        Ok(MapExpr {
            domain: Arc::new(domain.clone()),
            node: Node::Constant(q),
        })
    }

    /// Rotation by `angle` about `axis`; the domain must be a cap or annulus
    /// centered on the axis.
    pub fn rotation_about(domain: &Domain, axis: &ModelPoint, angle: f64) -> Result<MapExpr> {
        if !angle.is_finite() {
            return Err(Error::domain("rotation angle must be finite"));
        }
        let centered = domain
            .axis()
            .map(|c| distance(c, axis).map(|d| d <= AXIS_TOL).unwrap_or(false))
            .unwrap_or(false);
        if !centered {
            return Err(Error::domain(
                "rotations need a spherical cap or annulus centered on the axis",
            ));
        }
        Ok(MapExpr {
            domain: Arc::new(domain.clone()),
            node: Node::Rotation {
                axis: axis.clone(),
                angle,
            },
        })
    }

    /// `z -> t z (+) (1 - t) center`, certified on `B(center, radius)`.
    pub fn star_contraction(
        domain: &Domain,
        center: &ModelPoint,
        radius: f64,
        t: f64,
    ) -> Result<MapExpr> {
        let star = domain
            .star_center()
            .ok_or_else(|| Error::domain("domain is not star-shaped about any recorded center"))?;
        if distance(star, center).map(|d| d > AXIS_TOL).unwrap_or(true) {
            return Err(Error::domain("contraction center must be the domain's star center"));
        }
        let enclosing = domain.enclosing_radius().unwrap_or(f64::INFINITY);
        if enclosing > radius + 1e-12 {
            return Err(Error::domain(format!(
                "domain reaches distance {enclosing} from the center, beyond radius {radius}"
            )));
        }
        let certificate = certify_star_contraction(center, radius, t)?;
        Ok(MapExpr {
            domain: Arc::new(domain.clone()),
            node: Node::StarContraction {
                center: center.clone(),
                certificate,
            },
        })
    }

    /// `outer` after `inner`.
    pub fn compose(outer: &MapExpr, inner: &MapExpr) -> Result<MapExpr> {
        if outer.domain != inner.domain {
            return Err(Error::domain("composed maps must share a domain"));
        }
        Ok(MapExpr {
            domain: inner.domain.clone(),
            node: Node::Compose(Box::new(outer.node.clone()), Box::new(inner.node.clone())),
        })
    }

    pub fn analytic_1d(domain: &Domain, which: Analytic1d) -> Result<MapExpr> {
        match domain.kind() {
            DomainKind::EuclideanInterval { lo, hi } if *lo == 0.0 && *hi == 1.0 => Ok(MapExpr {
                domain: Arc::new(domain.clone()),
                node: Node::Analytic1d(which),
            }),
            _ => Err(Error::domain("analytic maps live on the interval [0, 1]")),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn curvature(&self) -> Curvature {
        self.domain.curvature()
    }

    /// Image of a member of the domain.
    pub fn evaluate(&self, p: &ModelPoint) -> Result<ModelPoint> {
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain);
        }
        apply(&self.node, p)
    }

    /// Evaluation without the membership test, for points the caller drew
    /// from the domain itself.
    pub(crate) fn apply(&self, p: &ModelPoint) -> Result<ModelPoint> {
        apply(&self.node, p)
    }

    /// Upper bound on the Lipschitz constant implied by the constructors.
    pub fn certified_lipschitz(&self) -> f64 {
        certified(&self.node)
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn apply(node: &Node, p: &ModelPoint) -> Result<ModelPoint> {
    match node {
        Node::Identity => Ok(p.clone()),
        Node::Constant(q) => Ok(q.clone()),
        Node::Rotation { axis, angle } => {
            let v = rotate_about(axis.xyz(), p.xyz(), *angle);
            let n = norm3(v);
            Ok(ModelPoint::from_raw(
                p.curvature(),
                [v[0] / n, v[1] / n, v[2] / n].into_iter().collect(),
            ))
        }
        Node::StarContraction {
            center,
            certificate,
        } => geodesic_point(center, p, certificate.t),
        Node::Compose(outer, inner) => apply(outer, &apply(inner, p)?),
        Node::Analytic1d(a) => Ok(ModelPoint::from_raw(
            p.curvature(),
            [a.eval(p.coords()[0])].into_iter().collect(),
        )),
    }
}

fn certified(node: &Node) -> f64 {
    match node {
        Node::Identity | Node::Rotation { .. } | Node::Analytic1d(_) => 1.0,
        Node::Constant(_) => 0.0,
        Node::StarContraction { certificate, .. } => certificate.lip_bound,
        Node::Compose(outer, inner) => certified(outer) * certified(inner),
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Identity => write!(f, "identity"),
            Node::Constant(q) => write!(f, "constant({:?})", q.coords()),
            Node::Rotation { angle, .. } => write!(f, "rotation({angle})"),
            Node::StarContraction { certificate, .. } => {
                write!(f, "star(R={}, t={})", certificate.radius, certificate.t)
            }
            Node::Compose(o, i) => write!(f, "{o} . {i}"),
            Node::Analytic1d(a) => write!(f, "{}", a.name()),
        }
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.node.fmt(f)
    }
}
