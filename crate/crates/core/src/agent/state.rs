use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "person", rename_all = "snake_case")]
pub enum Location {
    OnTable,
    /// Placed in front of a person.
    DeliveredTo(String),
    /// Handed over into a person's hand.
    HeldBy(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("unknown object {0:?}")]
    UnknownObject(String),
    #[error("object {object:?} is not on the table ({location:?})")]
    NotOnTable { object: String, location: Location },
    #[error("source and target container are both {0:?}")]
    SameContainer(String),
    #[error("person name must not be empty")]
    EmptyPerson,
}

/// Action tools executed against the simulated scene, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ExecutedAction {
    MoveObjectToPerson { object: String, person: String },
    HandObjectOverToPerson { object: String, person: String },
    PourInto { source: String, target: String, poured: Vec<String> },
}

/// Stand-in for the physical robot: where every object is and what the
/// containers hold. The robot AOI is not a manipulable object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedSceneState {
    locations: BTreeMap<String, Location>,
    contents: BTreeMap<String, Vec<String>>,
    actions: Vec<ExecutedAction>,
}

impl SimulatedSceneState {
    pub fn from_scene(scene: &Scene) -> Self {
        let mut locations = BTreeMap::new();
        let mut contents = BTreeMap::new();
        for obj in scene.items() {
            locations.insert(obj.id.clone(), Location::OnTable);
            contents.insert(obj.id.clone(), obj.contents.clone());
        }
        Self {
            locations,
            contents,
            actions: Vec::new(),
        }
    }

    pub fn location(&self, object: &str) -> Option<&Location> {
        self.locations.get(object)
    }

    pub fn contents(&self, object: &str) -> Option<&[String]> {
        self.contents.get(object).map(Vec::as_slice)
    }

    pub fn actions(&self) -> &[ExecutedAction] {
        &self.actions
    }

    pub fn object_count(&self) -> usize {
        self.locations.len()
    }

    /// Every content label across all containers, sorted.
    pub fn all_contents(&self) -> Vec<String> {
        let mut all: Vec<String> = self.contents.values().flatten().cloned().collect();
        all.sort();
        all
    }

    fn take_from_table(&self, object: &str) -> Result<(), ActionError> {
        match self.locations.get(object) {
            None => Err(ActionError::UnknownObject(object.to_string())),
            Some(Location::OnTable) => Ok(()),
            Some(other) => Err(ActionError::NotOnTable {
                object: object.to_string(),
                location: other.clone(),
            }),
        }
    }

    pub fn move_object_to_person(&mut self, object: &str, person: &str) -> Result<String, ActionError> {
        if person.trim().is_empty() {
            return Err(ActionError::EmptyPerson);
        }
        self.take_from_table(object)?;
        self.locations
            .insert(object.to_string(), Location::DeliveredTo(person.to_string()));
        self.actions.push(ExecutedAction::MoveObjectToPerson {
            object: object.to_string(),
            person: person.to_string(),
        });
        Ok(format!("Moved {object} to {person}."))
    }

    pub fn hand_object_over_to_person(&mut self, object: &str, person: &str) -> Result<String, ActionError> {
        if person.trim().is_empty() {
            return Err(ActionError::EmptyPerson);
        }
        self.take_from_table(object)?;
        self.locations
            .insert(object.to_string(), Location::HeldBy(person.to_string()));
        self.actions.push(ExecutedAction::HandObjectOverToPerson {
            object: object.to_string(),
            person: person.to_string(),
        });
        Ok(format!("Handed {object} over to {person}."))
    }

    /// Moves everything in `source` into `target` and puts `source` back on
    /// the table. Pouring from an empty container is allowed.
    pub fn pour_into(&mut self, source: &str, target: &str) -> Result<String, ActionError> {
        for id in [source, target] {
            if !self.locations.contains_key(id) {
                return Err(ActionError::UnknownObject(id.to_string()));
            }
        }
        if source == target {
            return Err(ActionError::SameContainer(source.to_string()));
        }
        let poured = std::mem::take(self.contents.get_mut(source).expect("checked above"));
        self.contents
            .get_mut(target)
            .expect("checked above")
            .extend(poured.iter().cloned());
        self.locations.insert(source.to_string(), Location::OnTable);
        let msg = if poured.is_empty() {
            format!("Poured from {source} into {target}; {source} was empty. {source} is back on the table.")
        } else {
            format!(
                "Poured {} from {source} into {target}. {source} is back on the table.",
                poured.join(", ")
            )
        };
        self.actions.push(ExecutedAction::PourInto {
            source: source.to_string(),
            target: target.to_string(),
            poured,
        });
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, ObjectKind, SceneObject, Vec3};

    fn scene() -> Scene {
        let b = |x: f64| Aabb::from_center_size(Vec3::new(x, 0.0, 0.0), Vec3::new(0.1, 0.1, 0.1)).unwrap();
        Scene::new(
            "test",
            vec![
                SceneObject::new("cereal_box", "Cereal box", ObjectKind::Object, b(0.0)).with_contents(["cereal"]),
                SceneObject::new("bowl", "Bowl", ObjectKind::Object, b(0.3)),
                SceneObject::new("milk_bottle", "Milk", ObjectKind::Object, b(0.6)).with_contents(["milk"]),
                SceneObject::new("the_robot", "Robot", ObjectKind::Robot, b(2.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn move_then_move_again_fails() {
        let mut s = SimulatedSceneState::from_scene(&scene());
        s.move_object_to_person("milk_bottle", "user").unwrap();
        assert_eq!(s.location("milk_bottle"), Some(&Location::DeliveredTo("user".into())));
        assert!(matches!(
            s.move_object_to_person("milk_bottle", "user"),
            Err(ActionError::NotOnTable { .. })
        ));
        assert_eq!(
            s.hand_object_over_to_person("spoon", "user"),
            Err(ActionError::UnknownObject("spoon".into()))
        );
        assert_eq!(
            s.hand_object_over_to_person("the_robot", "user"),
            Err(ActionError::UnknownObject("the_robot".into()))
        );
    }

    #[test]
    fn pour_moves_contents_and_returns_source() {
        let mut s = SimulatedSceneState::from_scene(&scene());
        let before = s.all_contents();
        s.hand_object_over_to_person("cereal_box", "user").unwrap();
        s.pour_into("cereal_box", "bowl").unwrap();
        assert_eq!(s.contents("bowl").unwrap(), ["cereal"]);
        assert!(s.contents("cereal_box").unwrap().is_empty());
        assert_eq!(s.location("cereal_box"), Some(&Location::OnTable));
        assert_eq!(s.all_contents(), before);
        assert_eq!(s.object_count(), 3);
    }

    #[test]
    fn pour_edge_cases() {
        let mut s = SimulatedSceneState::from_scene(&scene());
        assert_eq!(s.pour_into("bowl", "bowl"), Err(ActionError::SameContainer("bowl".into())));
        assert!(s.pour_into("bowl", "cereal_box").is_ok());
        assert_eq!(s.contents("cereal_box").unwrap(), ["cereal"]);
        assert_eq!(s.pour_into("x", "bowl"), Err(ActionError::UnknownObject("x".into())));
    }
}
