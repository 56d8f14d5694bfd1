use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Axis-aligned bounding box. Zero-extent axes are allowed, so a box can
/// degenerate to a plane, a segment or a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, GeometryError> {
        let aabb = Self { min, max };
        aabb.validate()?;
        Ok(aabb)
    }

    /// Box of the given full `size` centered on `center`.
    pub fn from_center_size(center: Vec3, size: Vec3) -> Result<Self, GeometryError> {
        let half = size * 0.5;
        Self::new(center - half, center + half)
    }

    pub fn point(p: Vec3) -> Self {
        Self { min: p, max: p }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z {
            return Err(GeometryError::InvertedAabb {
                min: self.min,
                max: self.max,
            });
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Object,
    Robot,
}

/// A labeled area of interest. The robot (or the camera standing in for it)
/// is an AOI like any other object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub label: String,
    pub kind: ObjectKind,
    pub aabb: Aabb,
    /// Opaque content labels used by the simulated scene (e.g. `ice_cubes`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contents: Vec<String>,
}

impl SceneObject {
    pub fn new(id: impl Into<String>, label: impl Into<String>, kind: ObjectKind, aabb: Aabb) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kind,
            aabb,
            contents: Vec::new(),
        }
    }

    pub fn with_contents<I, S>(mut self, contents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.contents = contents.into_iter().map(Into::into).collect();
        self
    }
}

/// Object ids double as tool arguments and prompt tokens, so they are
/// restricted to `[A-Za-z0-9_-]+`.
pub fn is_valid_object_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Closed-world set of objects. Construction checks ids and boxes;
/// [`Scene::validate`] additionally requires exactly one robot AOI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(name: impl Into<String>, objects: Vec<SceneObject>) -> Result<Self, GeometryError> {
        let mut seen = BTreeSet::new();
        for obj in &objects {
            if !is_valid_object_id(&obj.id) {
                return Err(GeometryError::InvalidId(obj.id.clone()));
            }
            if !seen.insert(obj.id.as_str()) {
                return Err(GeometryError::DuplicateId(obj.id.clone()));
            }
            obj.aabb.validate()?;
        }
        Ok(Self {
            name: name.into(),
            objects,
        })
    }

    /// Checks the full scene invariant: exactly one object of kind robot.
    pub fn validate(&self) -> Result<(), GeometryError> {
        match self.objects.iter().filter(|o| o.kind == ObjectKind::Robot).count() {
            1 => Ok(()),
            0 => Err(GeometryError::MissingRobot),
            n => Err(GeometryError::MultipleRobots(n)),
        }
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn get(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn robot(&self) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.kind == ObjectKind::Robot)
    }

    pub fn robot_id(&self) -> Option<&str> {
        self.robot().map(|o| o.id.as_str())
    }

    /// Non-robot objects in declaration order.
    pub fn items(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(|o| o.kind == ObjectKind::Object)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.objects.iter().map(|o| o.id.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }
}
