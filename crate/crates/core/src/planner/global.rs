use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::logical::{AccessMethod, JoinMethod, LogicalPlan};
use crate::datamodel::{Atom, Operand, Predicate, TableId, Value};
use crate::error::{Error, Result};
use crate::frontend::{AggTemplate, BaseCol, Catalog, ColumnRef, SortDir, StatementId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// The result sink; always node 0.
pub const OUTPUT: NodeId = NodeId(0);

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Output,
    Table { table: TableId },
    Join {
        method: JoinMethod,
        outer_key: BaseCol,
        inner_key: BaseCol,
    },
    Filter,
    GroupBy {
        keys: Vec<BaseCol>,
        aggs: Vec<AggTemplate>,
    },
    Sort { key: ColumnRef, dir: SortDir },
    TopN { key: ColumnRef, dir: SortDir },
}

impl NodeKind {
    pub fn is_operator(&self) -> bool {
        !matches!(self, NodeKind::Output | NodeKind::Table { .. })
    }

    pub fn is_blocking(&self) -> bool {
        matches!(self, NodeKind::GroupBy { .. } | NodeKind::Sort { .. } | NodeKind::TopN { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortRole {
    Single,
    Outer,
    Inner,
}

pub type StreamSchema = Arc<[ColumnRef]>;

#[derive(Debug, Clone, PartialEq)]
pub struct InPort {
    pub producer: NodeId,
    /// Index into the producer's `outputs`.
    pub edge: usize,
    pub role: PortRole,
    pub schema: StreamSchema,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutEdge {
    pub stream: usize,
    pub consumer: NodeId,
    pub port: usize,
}

/// An output stream of a node. Operators produce one stream per non-inner
/// input port; table nodes produce a single stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub port: Option<usize>,
    pub schema: StreamSchema,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub inputs: Vec<InPort>,
    pub streams: Vec<Stream>,
    pub outputs: Vec<OutEdge>,
}

impl PlanNode {
    pub fn stream_for_port(&self, port: usize) -> Option<usize> {
        self.streams.iter().position(|s| s.port == Some(port))
    }

    pub fn inner_port(&self) -> Option<usize> {
        self.inputs.iter().position(|p| p.role == PortRole::Inner)
    }
}

/// Per-query configuration of one step; operands refer to the query's
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum StepConfig {
    Access { pred: Predicate, method: AccessMethod },
    Join,
    /// Column-index pairs that must be equal.
    Filter { eqs: Vec<(usize, usize)> },
    /// Atoms over the group output (keys then aggregates).
    GroupBy { having: Predicate },
    Sort,
    TopN { limit: Operand },
    Output { projection: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub node: NodeId,
    /// Out edge of `node` feeding the parent step; unused for the output step.
    pub edge: usize,
    /// `(input port, child step)` pairs.
    pub inputs: Vec<(usize, usize)>,
    pub config: StepConfig,
}

/// A statement's route through the global plan, as steps in post-order;
/// the last step is the output.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTemplate {
    pub steps: Vec<Step>,
}

impl PathTemplate {
    pub fn root(&self) -> usize {
        self.steps.len() - 1
    }
}

/// A path template instantiated with one query's parameters.
#[derive(Debug, Clone)]
pub struct QueryPath {
    pub template: Arc<PathTemplate>,
    pub params: Arc<[Value]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundStep {
    pub node: NodeId,
    pub config: StepConfig,
}

fn bind_pred(p: &Predicate, params: &[Value]) -> Result<Predicate> {
    p.bind(params)
}

impl QueryPath {
    pub fn steps(&self) -> &[Step] {
        &self.template.steps
    }

    /// Steps with every parameter slot replaced by its value.
    pub fn bound_steps(&self) -> Result<Vec<BoundStep>> {
        self.template
            .steps
            .iter()
            .map(|s| {
                let config = match &s.config {
                    StepConfig::Access { pred, method } => StepConfig::Access {
                        pred: bind_pred(pred, &self.params)?,
                        method: method.clone(),
                    },
                    StepConfig::GroupBy { having } => StepConfig::GroupBy {
                        having: bind_pred(having, &self.params)?,
                    },
                    StepConfig::TopN { limit } => StepConfig::TopN {
                        limit: Operand::Const(limit.resolve(&self.params)?.clone()),
                    },
                    other => other.clone(),
                };
                Ok(BoundStep { node: s.node, config })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPlan {
    pub nodes: Vec<PlanNode>,
    table_nodes: Vec<NodeId>,
    templates: Vec<Arc<PathTemplate>>,
    registry: BTreeMap<StatementId, usize>,
}

struct Attached {
    node: NodeId,
    stream: usize,
    step: usize,
}

impl GlobalPlan {
    /// An empty plan with the output sink and one table node per table.
    pub fn new(catalog: &Catalog) -> GlobalPlan {
        let mut nodes = vec![PlanNode {
            id: OUTPUT,
            kind: NodeKind::Output,
            inputs: Vec::new(),
            streams: Vec::new(),
            outputs: Vec::new(),
        }];
        let mut table_nodes = Vec::new();
        for def in catalog.tables() {
            let id = NodeId(nodes.len());
            let schema: StreamSchema = (0..def.schema.arity())
                .map(|column| ColumnRef::Base(BaseCol { table: def.id, column }))
                .collect();
            nodes.push(PlanNode {
                id,
                kind: NodeKind::Table { table: def.id },
                inputs: Vec::new(),
                streams: vec![Stream { port: None, schema }],
                outputs: Vec::new(),
            });
            table_nodes.push(id);
        }
        GlobalPlan {
            nodes,
            table_nodes,
            templates: Vec::new(),
            registry: BTreeMap::new(),
        }
    }

    pub fn node(&self, id: NodeId) -> &PlanNode {
        &self.nodes[id.0]
    }

    pub fn table_node(&self, table: TableId) -> NodeId {
        self.table_nodes[table as usize]
    }

    /// Nodes other than tables and the output sink.
    pub fn operator_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind.is_operator()).count()
    }

    pub fn templates(&self) -> &[Arc<PathTemplate>] {
        &self.templates
    }

    pub fn template(&self, stmt: StatementId) -> Option<&Arc<PathTemplate>> {
        self.registry.get(&stmt).map(|&i| &self.templates[i])
    }

    /// Whether `to` is reachable from `from` along output edges.
    fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if std::mem::replace(&mut seen[n.0], true) {
                continue;
            }
            stack.extend(self.nodes[n.0].outputs.iter().map(|e| e.consumer));
        }
        false
    }

    fn add_node(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(PlanNode {
            id,
            kind,
            inputs: Vec::new(),
            streams: Vec::new(),
            outputs: Vec::new(),
        });
        id
    }

    fn find_port(&self, node: NodeId, producer: NodeId, stream: usize, role: PortRole) -> Option<usize> {
        self.nodes[node.0].inputs.iter().position(|p| {
            p.role == role
                && p.producer == producer
                && self.nodes[producer.0].outputs[p.edge].stream == stream
        })
    }

    /// Connects `producer`'s stream to a (new or existing) port of `consumer`.
    fn connect(&mut self, producer: NodeId, stream: usize, consumer: NodeId, role: PortRole) -> usize {
        if let Some(p) = self.find_port(consumer, producer, stream, role) {
            return p;
        }
        let port = self.nodes[consumer.0].inputs.len();
        let schema = self.nodes[producer.0].streams[stream].schema.clone();
        let edge = self.nodes[producer.0].outputs.len();
        self.nodes[producer.0].outputs.push(OutEdge {
            stream,
            consumer,
            port,
        });
        self.nodes[consumer.0].inputs.push(InPort {
            producer,
            edge,
            role,
            schema,
        });
        port
    }

    /// Output stream of `node` for `port`, created with `schema` if absent.
    fn stream_of(&mut self, node: NodeId, port: usize, schema: impl FnOnce() -> StreamSchema) -> usize {
        if let Some(s) = self.nodes[node.0].stream_for_port(port) {
            return s;
        }
        let n = &mut self.nodes[node.0];
        n.streams.push(Stream {
            port: Some(port),
            schema: schema(),
        });
        n.streams.len() - 1
    }

    /// First node of `kind` that can take `producer`'s stream without
    /// creating a cycle.
    fn shareable(&self, kind: &NodeKind, producers: &[NodeId]) -> Option<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind == *kind)
            .map(|n| n.id)
            .find(|&n| producers.iter().all(|&p| !self.reaches(n, p)))
    }

    fn schema_of(&self, node: NodeId, stream: usize) -> StreamSchema {
        self.nodes[node.0].streams[stream].schema.clone()
    }

    fn attach(&mut self, plan: &LogicalPlan, steps: &mut Vec<Step>, catalog: &Catalog) -> Result<Attached> {
        let position = |schema: &StreamSchema, c: &ColumnRef| -> Result<usize> {
            schema
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::UnknownColumn(c.display(catalog)))
        };
        match plan {
            LogicalPlan::Access { table, pred, method } => {
                let node = self.table_node(*table);
                steps.push(Step {
                    node,
                    edge: usize::MAX,
                    inputs: Vec::new(),
                    config: StepConfig::Access {
                        pred: pred.clone(),
                        method: method.clone(),
                    },
                });
                Ok(Attached {
                    node,
                    stream: 0,
                    step: steps.len() - 1,
                })
            }
            LogicalPlan::Join {
                outer,
                inner,
                outer_key,
                inner_key,
                method,
            } => {
                let o = self.attach(outer, steps, catalog)?;
                let i = self.attach(inner, steps, catalog)?;
                let kind = NodeKind::Join {
                    method: *method,
                    outer_key: *outer_key,
                    inner_key: *inner_key,
                };
                let node = match self.shareable(&kind, &[o.node, i.node]) {
                    Some(n) => n,
                    None => self.add_node(kind),
                };
                let inner_port = self.connect(i.node, i.stream, node, PortRole::Inner);
                let outer_port = self.connect(o.node, o.stream, node, PortRole::Outer);
                let outer_schema = self.schema_of(o.node, o.stream);
                let inner_schema = self.schema_of(i.node, i.stream);
                let stream = self.stream_of(node, outer_port, || {
                    outer_schema.iter().chain(inner_schema.iter()).copied().collect()
                });
                steps[o.step].edge = self.nodes[node.0].inputs[outer_port].edge;
                steps[i.step].edge = self.nodes[node.0].inputs[inner_port].edge;
                steps.push(Step {
                    node,
                    edge: usize::MAX,
                    inputs: vec![(outer_port, o.step), (inner_port, i.step)],
                    config: StepConfig::Join,
                });
                Ok(Attached {
                    node,
                    stream,
                    step: steps.len() - 1,
                })
            }
            LogicalPlan::Filter { input, eqs } => {
                let a = self.attach(input, steps, catalog)?;
                let schema = self.schema_of(a.node, a.stream);
                let eqs = eqs
                    .iter()
                    .map(|(x, y)| {
                        Ok((
                            position(&schema, &ColumnRef::Base(*x))?,
                            position(&schema, &ColumnRef::Base(*y))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let existing = self
                    .nodes
                    .iter()
                    .find(|n| n.kind == NodeKind::Filter && self.find_port(n.id, a.node, a.stream, PortRole::Single).is_some())
                    .map(|n| n.id);
                let node = existing.unwrap_or_else(|| self.add_node(NodeKind::Filter));
                self.unary(node, a, schema, StepConfig::Filter { eqs }, steps)
            }
            LogicalPlan::GroupBy {
                input,
                keys,
                aggs,
                having,
            } => {
                let a = self.attach(input, steps, catalog)?;
                let out_schema: StreamSchema = keys
                    .iter()
                    .map(|k| ColumnRef::Base(*k))
                    .chain(aggs.iter().map(|g| ColumnRef::Agg(*g)))
                    .collect();
                let having = Predicate::new(
                    having
                        .iter()
                        .map(|h| Ok(Atom::new(position(&out_schema, &h.target)?, h.op, h.operand.clone())))
                        .collect::<Result<_>>()?,
                );
                let kind = NodeKind::GroupBy {
                    keys: keys.clone(),
                    aggs: aggs.clone(),
                };
                let node = match self.shareable(&kind, &[a.node]) {
                    Some(n) => n,
                    None => self.add_node(kind),
                };
                self.unary(node, a, out_schema, StepConfig::GroupBy { having }, steps)
            }
            LogicalPlan::Sort { input, key, dir } | LogicalPlan::TopN { input, key, dir, .. } => {
                let a = self.attach(input, steps, catalog)?;
                let schema = self.schema_of(a.node, a.stream);
                position(&schema, key)?;
                let (kind, config) = match plan {
                    LogicalPlan::TopN { limit, .. } => (
                        NodeKind::TopN { key: *key, dir: *dir },
                        StepConfig::TopN { limit: limit.clone() },
                    ),
                    _ => (NodeKind::Sort { key: *key, dir: *dir }, StepConfig::Sort),
                };
                let node = match self.shareable(&kind, &[a.node]) {
                    Some(n) => n,
                    None => self.add_node(kind),
                };
                self.unary(node, a, schema, config, steps)
            }
            LogicalPlan::Output { input, projection } => {
                let a = self.attach(input, steps, catalog)?;
                let schema = self.schema_of(a.node, a.stream);
                let projection = projection
                    .iter()
                    .map(|c| position(&schema, c))
                    .collect::<Result<Vec<_>>>()?;
                self.unary(OUTPUT, a, schema, StepConfig::Output { projection }, steps)
            }
        }
    }

    fn unary(
        &mut self,
        node: NodeId,
        a: Attached,
        out_schema: StreamSchema,
        config: StepConfig,
        steps: &mut Vec<Step>,
    ) -> Result<Attached> {
        let port = self.connect(a.node, a.stream, node, PortRole::Single);
        let stream = if node == OUTPUT {
            usize::MAX
        } else {
            self.stream_of(node, port, || out_schema)
        };
        steps[a.step].edge = self.nodes[node.0].inputs[port].edge;
        steps.push(Step {
            node,
            edge: usize::MAX,
            inputs: vec![(port, a.step)],
            config,
        });
        Ok(Attached {
            node,
            stream,
            step: steps.len() - 1,
        })
    }

    /// Adds one statement's plan, sharing existing nodes where kind and
    /// configuration match. Identical paths share one template.
    pub fn add_plan(&mut self, stmt: StatementId, plan: &LogicalPlan, catalog: &Catalog) -> Result<Arc<PathTemplate>> {
        if !matches!(plan, LogicalPlan::Output { .. }) {
            return Err(Error::Unsupported("plan must end in an output".into()));
        }
        let mut steps = Vec::new();
        self.attach(plan, &mut steps, catalog)?;
        let template = PathTemplate { steps };
        let idx = match self.templates.iter().position(|t| **t == template) {
            Some(i) => i,
            None => {
                self.templates.push(Arc::new(template));
                self.templates.len() - 1
            }
        };
        self.registry.insert(stmt, idx);
        Ok(self.templates[idx].clone())
    }

    /// Node ids in an order where every producer precedes its consumers.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut indegree: Vec<usize> = self.nodes.iter().map(|n| n.inputs.len()).collect();
        let mut ready: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.inputs.is_empty())
            .map(|n| n.id)
            .rev()
            .collect();
        let mut order = Vec::new();
        while let Some(n) = ready.pop() {
            order.push(n);
            for e in &self.nodes[n.0].outputs {
                indegree[e.consumer.0] -= 1;
                if indegree[e.consumer.0] == 0 {
                    ready.push(e.consumer);
                }
            }
        }
        order
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().len() == self.nodes.len()
    }

    pub fn node_name(&self, id: NodeId, catalog: &Catalog) -> String {
        let n = &self.nodes[id.0];
        let col = |c: &BaseCol| catalog.column_label(c.table, c.column);
        match &n.kind {
            NodeKind::Output => "output".to_string(),
            NodeKind::Table { table } => format!("n{}:table({})", id.0, catalog.table(*table).name),
            NodeKind::Join {
                method,
                outer_key,
                inner_key,
            } => format!("n{}:{method:?}Join({} = {})", id.0, col(outer_key), col(inner_key)),
            NodeKind::Filter => format!("n{}:filter", id.0),
            NodeKind::GroupBy { keys, aggs } => {
                let keys: Vec<String> = keys.iter().map(col).collect();
                let aggs: Vec<String> = aggs.iter().map(|a| a.display(catalog)).collect();
                format!("n{}:groupby([{}], [{}])", id.0, keys.join(", "), aggs.join(", "))
            }
            NodeKind::Sort { key, dir } => format!("n{}:sort({} {dir})", id.0, key.display(catalog)),
            NodeKind::TopN { key, dir } => format!("n{}:topn({} {dir})", id.0, key.display(catalog)),
        }
    }

    /// Text listing of nodes, edges and path templates.
    pub fn describe(&self, catalog: &Catalog) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "global plan: {} operators, {} tables",
            self.operator_count(),
            self.table_nodes.len()
        );
        for n in &self.nodes {
            let _ = writeln!(out, "{}", self.node_name(n.id, catalog));
            for (i, p) in n.inputs.iter().enumerate() {
                let _ = writeln!(out, "  in{i} {:?} <- n{}.e{}", p.role, p.producer.0, p.edge);
            }
            for (i, e) in n.outputs.iter().enumerate() {
                let _ = writeln!(out, "  e{i} s{} -> n{}.in{}", e.stream, e.consumer.0, e.port);
            }
        }
        for (stmt, &t) in &self.registry {
            let steps: Vec<String> = self.templates[t]
                .steps
                .iter()
                .map(|s| format!("n{}", s.node.0))
                .collect();
            let _ = writeln!(out, "path {stmt} (template {t}): {}", steps.join(" -> "));
        }
        out
    }
}

/// Merges per-statement plans into one global plan.
pub fn merge_plans(plans: &[(StatementId, LogicalPlan)], catalog: &Catalog) -> Result<GlobalPlan> {
    let mut g = GlobalPlan::new(catalog);
    for (id, plan) in plans {
        g.add_plan(*id, plan, catalog)?;
    }
    Ok(g)
}
