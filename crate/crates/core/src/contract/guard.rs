use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::{BlameLabel, ContractViolation, JoinPredicate, Modifier, Position, Privilege, ViewContract, ViewTransform};
use crate::capability::{AggregateSpec, ViewCapability, ViewValue};
use crate::error::{Error, Result};
use crate::sql::{Expr, Ident, SelectItem};

static NEXT_LAYER: AtomicU64 = AtomicU64::new(1);

/// One contract wrapper. Views derived through a layer share it: same
/// identity, same group memberships, same check counter.
#[derive(Clone)]
pub(crate) struct Layer {
    contract: Arc<ViewContract>,
    /// Membership-only layers grant everything.
    grants_all: bool,
    blame: BlameLabel,
    id: u64,
    groups: Vec<Arc<JoinGroup>>,
    checks: Arc<AtomicU64>,
}

impl Layer {
    fn new(contract: Arc<ViewContract>, blame: BlameLabel, groups: Vec<Arc<JoinGroup>>) -> Layer {
        let id = NEXT_LAYER.fetch_add(1, Ordering::Relaxed);
        for g in &groups {
            g.admit(id);
        }
        Layer {
            grants_all: contract.is_flat(),
            contract,
            blame,
            id,
            groups,
            checks: Arc::new(AtomicU64::new(0)),
        }
    }

    fn permit(&self, p: Privilege) -> Result<&[Modifier]> {
        self.checks.fetch_add(1, Ordering::Relaxed);
        if self.grants_all {
            return Ok(&[]);
        }
        self.contract.modifiers(p).ok_or_else(|| {
            ContractViolation::new(&self.blame, Some(p), format!("{p} is not granted")).into()
        })
    }

    fn violation(&self, p: Privilege, detail: impl Into<String>) -> Error {
        ContractViolation::new(&self.blame, Some(p), detail).into()
    }

    fn memberships(&self) -> impl Iterator<Item = &Arc<JoinGroup>> {
        self.groups.iter().filter(|g| g.has_member(self.id))
    }
}

/// A shared group instance created by one application of a contracted
/// function. Members may be joined with each other.
pub struct JoinGroup {
    pub(crate) name: String,
    pub(crate) ordinal: usize,
    pub(crate) pre: Vec<JoinPredicate>,
    pub(crate) post: Vec<ViewTransform>,
    pub(crate) with: Option<Arc<ViewContract>>,
    pub(crate) blame: BlameLabel,
    members: Mutex<BTreeSet<u64>>,
}

impl fmt::Debug for JoinGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JoinGroup")
            .field("name", &self.name)
            .field("members", &self.member_count())
            .finish_non_exhaustive()
    }
}

impl JoinGroup {
    pub(crate) fn new(
        name: String,
        ordinal: usize,
        modifiers: &[Modifier],
        blame: BlameLabel,
    ) -> JoinGroup {
        let mut g = JoinGroup {
            name,
            ordinal,
            pre: Vec::new(),
            post: Vec::new(),
            with: None,
            blame,
            members: Mutex::new(BTreeSet::new()),
        };
        for m in modifiers {
            match m {
                Modifier::Pre(p) => g.pre.push(p.clone()),
                Modifier::Post(t) => g.post.push(t.clone()),
                Modifier::With(c) => g.with = Some(c.clone()),
                _ => {}
            }
        }
        g
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn member_count(&self) -> usize {
        self.members.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    fn admit(&self, id: u64) {
        self.members.lock().unwrap_or_else(|e| e.into_inner()).insert(id);
    }

    fn has_member(&self, id: u64) -> bool {
        self.members.lock().unwrap_or_else(|e| e.into_inner()).contains(&id)
    }
}

/// A view wrapped in one contract layer.
pub struct GuardedView {
    inner: ViewValue,
    layer: Layer,
}

impl fmt::Debug for GuardedView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GuardedView")
            .field("blame", &self.layer.blame)
            .field("contract", &self.layer.contract)
            .field("inner", &self.inner)
            .finish()
    }
}

impl GuardedView {
    pub fn inner(&self) -> &ViewValue {
        &self.inner
    }

    pub fn blame(&self) -> &BlameLabel {
        &self.layer.blame
    }

    pub fn contract(&self) -> &ViewContract {
        &self.layer.contract
    }

    /// How many privilege checks this layer has performed, across every view
    /// derived through it.
    pub fn check_count(&self) -> u64 {
        self.layer.checks.load(Ordering::Relaxed)
    }

    /// Names of the join groups this layer belongs to.
    pub fn groups(&self) -> Vec<String> {
        self.layer.memberships().map(|g| g.name.clone()).collect()
    }

    fn wrap(inner: ViewValue, layer: Layer) -> ViewValue {
        ViewValue::Guarded(Arc::new(GuardedView { inner, layer }))
    }

    pub(crate) fn filter(&self, pred: Expr) -> Result<ViewValue> {
        let mods = self.layer.permit(Privilege::Where)?;
        let mentioned = pred.mentions();
        for m in mods {
            if let Modifier::Prohibit(cols) = m {
                let hit: Vec<&Ident> = mentioned.intersection(cols).collect();
                if let Some(c) = hit.first() {
                    return Err(self.layer.violation(
                        Privilege::Where,
                        format!("+where: clause mentions prohibited column `{c}`"),
                    ));
                }
            }
        }
        let inner = self.inner.filter_expr(pred)?;
        Ok(GuardedView::wrap(inner, self.layer.clone()))
    }

    pub(crate) fn select(&self, items: Vec<SelectItem>) -> Result<ViewValue> {
        self.layer.permit(Privilege::Select)?;
        let inner = self.inner.select_items(items)?;
        Ok(GuardedView::wrap(inner, self.layer.clone()))
    }
}

impl ViewValue {
    /// Check counts of each layer, outermost first.
    pub fn layer_check_counts(&self) -> Vec<u64> {
        peel(self).0.iter().map(|l| l.checks.load(Ordering::Relaxed)).collect()
    }

    /// Blame labels of each layer, outermost first.
    pub fn layer_blames(&self) -> Vec<BlameLabel> {
        peel(self).0.iter().map(|l| l.blame.clone()).collect()
    }
}

/// Wrap `v` in `contract`, blaming `blame` for violations. The empty
/// contract returns `v` unchanged.
pub fn guard(v: &ViewValue, contract: ViewContract, blame: BlameLabel) -> Result<ViewValue> {
    contract.validate()?;
    if contract.is_flat() {
        return Ok(v.clone());
    }
    Ok(guard_layer(v, Arc::new(contract), blame, Vec::new()))
}

pub(crate) fn guard_layer(
    v: &ViewValue,
    contract: Arc<ViewContract>,
    blame: BlameLabel,
    groups: Vec<Arc<JoinGroup>>,
) -> ViewValue {
    GuardedView::wrap(v.clone(), Layer::new(contract, blame, groups))
}

/// Layers outermost first, and the raw capability under them.
fn peel(v: &ViewValue) -> (Vec<&Layer>, &ViewCapability) {
    let mut layers = Vec::new();
    let mut cur = v;
    loop {
        match cur {
            ViewValue::Raw(c) => return (layers, c),
            ViewValue::Guarded(g) => {
                layers.push(&g.layer);
                cur = &g.inner;
            }
        }
    }
}

/// Check privilege `p` on every layer, apply the collected `#:restrict`
/// transforms to the raw capability outermost first, then run `op`.
pub(crate) fn through_layers<T>(
    v: &ViewValue,
    p: Privilege,
    op: impl FnOnce(&ViewValue) -> Result<T>,
) -> Result<T> {
    let (layers, raw) = peel(v);
    let mut transforms = Vec::new();
    for layer in &layers {
        for m in layer.permit(p)? {
            if let Modifier::Restrict(t) = m {
                transforms.push(t.clone());
            }
        }
    }
    let mut effective = ViewValue::Raw(raw.clone());
    for t in transforms {
        effective = t(&effective)?;
    }
    op(&effective)
}

struct LayerJoin<'a> {
    layer: &'a Layer,
    pre: Vec<JoinPredicate>,
    post: Vec<ViewTransform>,
    with: Option<Arc<ViewContract>>,
}

fn shares(groups: &[Arc<JoinGroup>], g: &Arc<JoinGroup>) -> bool {
    groups.iter().any(|h| Arc::ptr_eq(h, g))
}

pub(crate) fn join(left: &ViewValue, right: &ViewValue, pred: Option<Expr>) -> Result<ViewValue> {
    let (ll, lraw) = peel(left);
    let (rl, rraw) = peel(right);

    let mut per_layer = Vec::with_capacity(ll.len() + rl.len());
    for layer in ll.iter().chain(rl.iter()) {
        let mut lj = LayerJoin {
            layer,
            pre: Vec::new(),
            post: Vec::new(),
            with: None,
        };
        for m in layer.permit(Privilege::Join)? {
            match m {
                Modifier::Pre(p) => lj.pre.push(p.clone()),
                Modifier::Post(t) => lj.post.push(t.clone()),
                Modifier::With(c) => lj.with = Some(c.clone()),
                _ => {}
            }
        }
        per_layer.push(lj);
    }

    let lgroups: Vec<Arc<JoinGroup>> = ll.iter().flat_map(|l| l.memberships()).cloned().collect();
    let rgroups: Vec<Arc<JoinGroup>> = rl.iter().flat_map(|l| l.memberships()).cloned().collect();
    let mut shared: Vec<Arc<JoinGroup>> = Vec::new();
    for g in &lgroups {
        if shares(&rgroups, g) && !shares(&shared, g) {
            shared.push(g.clone());
        }
    }
    if shared.is_empty() && !(lgroups.is_empty() && rgroups.is_empty()) {
        let offender = ll
            .iter()
            .chain(rl.iter())
            .find(|l| l.memberships().next().is_some())
            .expect("a side has memberships");
        return Err(offender.violation(
            Privilege::Join,
            "+join: the views do not share a join group",
        ));
    }
    shared.sort_by_key(|g| g.ordinal);

    let group_with: Vec<&Arc<JoinGroup>> = shared.iter().filter(|g| g.with.is_some()).collect();
    if group_with.len() > 1 {
        return Err(Error::MalformedContract(format!(
            "join groups {} and {} both supply #:with",
            group_with[0].name, group_with[1].name
        )));
    }

    let joined = lraw.join(rraw, pred.clone())?;

    for g in &shared {
        for p in &g.pre {
            if !p(left, right, pred.as_ref()) {
                return Err(ContractViolation::new(
                    &g.blame,
                    Some(Privilege::Join),
                    format!("+join: #:pre of join group {} rejected the join", g.name),
                )
                .into());
            }
        }
    }
    for lj in &per_layer {
        for p in &lj.pre {
            if !p(left, right, pred.as_ref()) {
                return Err(lj.layer.violation(Privilege::Join, "+join: #:pre rejected the join"));
            }
        }
    }

    let mut result = ViewValue::Raw(joined);
    for g in &shared {
        for t in &g.post {
            result = t(&result)?;
        }
    }
    for lj in &per_layer {
        for t in &lj.post {
            result = t(&result)?;
        }
    }

    let replaced = |l: &Layer| {
        group_with
            .first()
            .is_some_and(|g| l.memberships().any(|m| Arc::ptr_eq(m, g)))
    };
    if let Some(g) = group_with.first() {
        let with = g.with.clone().expect("filtered on with");
        let blame = BlameLabel::new(&g.blame.component, &g.blame.function, Position::Group(g.name.clone()));
        result = guard_layer(&result, with, blame, Vec::new());
    }
    // Right stack innermost, left stack outermost.
    for lj in per_layer.iter().rev() {
        if replaced(lj.layer) {
            continue;
        }
        result = match &lj.with {
            Some(c) => guard_layer(&result, c.clone(), lj.layer.blame.clone(), Vec::new()),
            None => GuardedView::wrap(result, lj.layer.clone()),
        };
    }
    Ok(result)
}

pub(crate) fn aggregate(v: &ViewValue, mut spec: AggregateSpec) -> Result<ViewValue> {
    let (layers, raw) = peel(v);
    let used = spec.functions();
    let mut havings = Vec::new();
    let mut withs = Vec::with_capacity(layers.len());
    for layer in &layers {
        let mut with = None;
        for m in layer.permit(Privilege::Aggregate)? {
            match m {
                Modifier::Aggrs(allowed) => {
                    if let Some(f) = used.iter().find(|f| !allowed.contains(f)) {
                        return Err(layer.violation(
                            Privilege::Aggregate,
                            format!("+aggregate: function {} is not allowed", f.name()),
                        ));
                    }
                }
                Modifier::Having(h) => havings.push(h.clone()),
                Modifier::With(c) => with = Some(c.clone()),
                _ => {}
            }
        }
        withs.push(with);
    }
    spec.having = Expr::conjoin(spec.having.take().into_iter().chain(havings));
    let mut result = ViewValue::Raw(raw.aggregate(spec)?);
    for (layer, with) in layers.iter().zip(withs).rev() {
        result = match with {
            Some(c) => guard_layer(&result, c, layer.blame.clone(), Vec::new()),
            None => GuardedView::wrap(result, (*layer).clone()),
        };
    }
    Ok(result)
}

#[allow(dead_code)]
fn assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<ViewValue>();
}
