//! Global, object, and handle stores shared by the execution models.
//! These hold state only; each model drives them with its own control flow.

use std::collections::BTreeMap;

use crate::ast::ObjectTypeDef;
use crate::outcome::ObjectSnapshot;
use crate::validate::ValidatedProgram;
use crate::value::{HandleId, ObjRef, Value};

pub(crate) fn init_globals(program: &ValidatedProgram) -> BTreeMap<String, Value> {
    program
        .globals()
        .iter()
        .map(|(name, init)| (name.clone(), Value::Int(*init)))
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct ObjectCell {
    pub type_name: String,
    pub fields: BTreeMap<String, Value>,
}

/// Objects in creation order; identities are dense indices.
#[derive(Debug, Clone, Default)]
pub(crate) struct ObjectHeap {
    cells: Vec<ObjectCell>,
}

impl ObjectHeap {
    pub fn new() -> Self {
        ObjectHeap::default()
    }

    pub fn alloc(&mut self, def: &ObjectTypeDef) -> ObjRef {
        let cell = ObjectCell {
            type_name: def.name.clone(),
            fields: def
                .fields
                .iter()
                .map(|f| (f.name.clone(), Value::Int(f.init)))
                .collect(),
        };
        self.cells.push(cell);
        ObjRef(self.cells.len() as u64 - 1)
    }

    pub fn get(&self, obj: ObjRef) -> &ObjectCell {
        &self.cells[obj.0 as usize]
    }

    pub fn field(&self, obj: ObjRef, name: &str) -> Option<Value> {
        self.cells[obj.0 as usize].fields.get(name).copied()
    }

    pub fn set_field(&mut self, obj: ObjRef, name: &str, value: Value) {
        self.cells[obj.0 as usize]
            .fields
            .insert(name.to_string(), value);
    }

    pub fn snapshot(&self) -> BTreeMap<u64, ObjectSnapshot> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (
                    i as u64,
                    ObjectSnapshot {
                        type_name: c.type_name.clone(),
                        fields: c.fields.clone(),
                    },
                )
            })
            .collect()
    }
}

/// Write-once reply slots.
#[derive(Debug, Clone, Default)]
pub(crate) struct HandleTable {
    slots: Vec<Option<Value>>,
}

impl HandleTable {
    pub fn new() -> Self {
        HandleTable::default()
    }

    pub fn alloc(&mut self) -> HandleId {
        self.slots.push(None);
        HandleId(self.slots.len() as u64 - 1)
    }

    /// Resolution is monotone: resolving twice is an executor bug.
    pub fn resolve(&mut self, handle: HandleId, value: Value) {
        let slot = &mut self.slots[handle.0 as usize];
        assert!(slot.is_none(), "handle {handle} resolved twice");
        *slot = Some(value);
    }

    pub fn get(&self, handle: HandleId) -> Option<Value> {
        self.slots[handle.0 as usize]
    }
}
