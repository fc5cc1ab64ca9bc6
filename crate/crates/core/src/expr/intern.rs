//! Per-thread hash-consing of expression nodes.
//!
//! Nodes are keyed shallowly: the node tag, its payload, and the addresses of
//! its (already interned) children. A live parent keeps its children alive, so
//! a hit on a live entry can never alias a recycled child address.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::{Arc, Weak};

use super::{Kind, Node};

#[derive(Hash, PartialEq, Eq)]
struct ShallowKey {
    tag: u8,
    a: u64,
    b: u64,
    name: Option<Arc<str>>,
    children: Vec<usize>,
}

struct Table {
    map: HashMap<ShallowKey, Weak<Node>>,
    sweep_at: usize,
}

thread_local! {
    static SHARING: Cell<bool> = const { Cell::new(true) };
    static TABLE: RefCell<Table> = RefCell::new(Table {
        map: HashMap::new(),
        sweep_at: 1 << 14,
    });
}

/// Runs `f` with hash-consing switched on or off on the current thread.
pub fn with_sharing<R>(enabled: bool, f: impl FnOnce() -> R) -> R {
    let previous = SHARING.with(|s| s.replace(enabled));
    let out = f();
    SHARING.with(|s| s.set(previous));
    out
}

pub fn sharing_enabled() -> bool {
    SHARING.with(|s| s.get())
}

fn key_of(kind: &Kind) -> ShallowKey {
    let ptrs = |xs: &[super::Expr]| xs.iter().map(|e| e.addr()).collect::<Vec<_>>();
    match kind {
        Kind::Const(s) => {
            let (t, a, b) = s.hash_bits();
            ShallowKey {
                tag: t,
                a,
                b,
                name: None,
                children: Vec::new(),
            }
        }
        Kind::Var(v) => ShallowKey {
            tag: 2,
            a: v.index as u64,
            b: 0,
            name: Some(v.name.clone()),
            children: Vec::new(),
        },
        Kind::Add(xs) => ShallowKey {
            tag: 3,
            a: 0,
            b: 0,
            name: None,
            children: ptrs(xs),
        },
        Kind::Mul(xs) => ShallowKey {
            tag: 4,
            a: 0,
            b: 0,
            name: None,
            children: ptrs(xs),
        },
        Kind::Div(a, b) => ShallowKey {
            tag: 5,
            a: 0,
            b: 0,
            name: None,
            children: vec![a.addr(), b.addr()],
        },
        Kind::Pow(a, b) => ShallowKey {
            tag: 6,
            a: 0,
            b: 0,
            name: None,
            children: vec![a.addr(), b.addr()],
        },
        Kind::Neg(a) => ShallowKey {
            tag: 7,
            a: 0,
            b: 0,
            name: None,
            children: vec![a.addr()],
        },
        Kind::Func(func, a) => ShallowKey {
            tag: 8,
            a: *func as u64,
            b: 0,
            name: None,
            children: vec![a.addr()],
        },
    }
}

pub(super) fn intern(node: Node) -> Arc<Node> {
    if !sharing_enabled() {
        return Arc::new(node);
    }
    TABLE.with(|table| {
        let mut table = table.borrow_mut();
        let key = key_of(&node.kind);
        if let Some(existing) = table.map.get(&key).and_then(Weak::upgrade) {
            return existing;
        }
        let arc = Arc::new(node);
        table.map.insert(key, Arc::downgrade(&arc));
        if table.map.len() > table.sweep_at {
            table.map.retain(|_, w| w.strong_count() > 0);
            table.sweep_at = (table.map.len() * 2).max(1 << 14);
        }
        arc
    })
}
