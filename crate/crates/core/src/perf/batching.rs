// SPDX-License-Identifier: Apache-2.0

//! Static batching: static objects sharing a material go out in one draw
//! call, every dynamic object costs its own call. Vertex limits on dynamic
//! batching are not modelled.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::PerfError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mobility {
    Dynamic,
    Static,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub material: String,
    pub mobility: Mobility,
}

impl SceneObject {
    pub fn new(id: impl Into<String>, material: impl Into<String>, mobility: Mobility) -> Self {
        Self { id: id.into(), material: material.into(), mobility }
    }
}

/// A scene file is a JSON list of objects.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneDescription(pub Vec<SceneObject>);

impl SceneDescription {
    pub fn objects(&self) -> &[SceneObject] {
        &self.0
    }

    /// Copy with the listed objects marked static.
    pub fn with_static<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Self {
        let ids: HashSet<&str> = ids.into_iter().collect();
        Self(
            self.0
                .iter()
                .map(|o| {
                    let mut o = o.clone();
                    if ids.contains(o.id.as_str()) {
                        o.mobility = Mobility::Static;
                    }
                    o
                })
                .collect(),
        )
    }

    /// Copy with every object dynamic.
    pub fn all_dynamic(&self) -> Self {
        Self(self.0.iter().map(|o| SceneObject { mobility: Mobility::Dynamic, ..o.clone() }).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawCall {
    pub material: String,
    pub mobility: Mobility,
    pub objects: Vec<String>,
}

/// Groups objects into draw calls, in order of each group's first object.
pub fn batch(scene: &SceneDescription) -> Result<Vec<DrawCall>, PerfError> {
    let mut seen = HashSet::new();
    let mut static_group: HashMap<&str, usize> = HashMap::new();
    let mut calls: Vec<DrawCall> = Vec::new();
    for o in scene.objects() {
        if !seen.insert(o.id.as_str()) {
            return Err(PerfError::DuplicateObject(o.id.clone()));
        }
        match o.mobility {
            Mobility::Static => match static_group.get(o.material.as_str()) {
                Some(&i) => calls[i].objects.push(o.id.clone()),
                None => {
                    static_group.insert(&o.material, calls.len());
                    calls.push(DrawCall {
                        material: o.material.clone(),
                        mobility: Mobility::Static,
                        objects: vec![o.id.clone()],
                    });
                }
            },
            Mobility::Dynamic => calls.push(DrawCall {
                material: o.material.clone(),
                mobility: Mobility::Dynamic,
                objects: vec![o.id.clone()],
            }),
        }
    }
    Ok(calls)
}

pub fn draw_call_count(scene: &SceneDescription) -> Result<usize, PerfError> {
    batch(scene).map(|c| c.len())
}
