//! Fixed analysis plan: the sub-tasks run for every source unit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::plugins::PluginId;
use super::source::ScrSourceUnit;
use crate::features::graph::assign_function_ids;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubTaskKind {
    Comprehension,
    ToolInvocation,
}

/// Comprehension prompts issued for every implemented function.
pub const COMPREHENSION_TEMPLATES: [&str; 3] = ["param-constraints", "return-checks", "override-obligations"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTask {
    pub kind: SubTaskKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plugin_id: Option<PluginId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_template_id: Option<String>,
    pub args: BTreeMap<String, String>,
}

impl SubTask {
    pub fn tool(plugin: PluginId, args: &[(&str, &str)]) -> Self {
        SubTask {
            kind: SubTaskKind::ToolInvocation,
            plugin_id: Some(plugin),
            prompt_template_id: None,
            args: args.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn comprehension(template: &str, args: &[(&str, &str)]) -> Self {
        SubTask {
            kind: SubTaskKind::Comprehension,
            plugin_id: None,
            prompt_template_id: Some(template.to_string()),
            args: args.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Exactly one of plugin and template is set, matching the kind.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            SubTaskKind::ToolInvocation => self.plugin_id.is_some() && self.prompt_template_id.is_none(),
            SubTaskKind::Comprehension => self.plugin_id.is_none() && self.prompt_template_id.is_some(),
        }
    }
}

/// Contracts list once per unit; per primary contract the interface check,
/// stopping there for interfaces, then the function list; per function the
/// call and CFG extraction followed by the three comprehension prompts.
pub fn plan_tasks(unit: &ScrSourceUnit) -> Vec<SubTask> {
    let model = &unit.compiled_model;
    let ids = assign_function_ids(model);
    let mut plan = vec![SubTask::tool(PluginId::GetAllContracts, &[("file", &unit.id)])];
    for contract in model.contracts.iter().filter(|c| model.is_primary(c)) {
        let c = contract.name.as_str();
        plan.push(SubTask::tool(PluginId::JudgeInterface, &[("contract", c)]));
        if contract.is_interface {
            continue;
        }
        plan.push(SubTask::tool(PluginId::GetAllFunctionsByContract, &[("contract", c)]));
        for f in &contract.functions {
            let id = &ids[&f.ast_id].0;
            let args = [("contract", c), ("function", id.as_str())];
            plan.push(SubTask::tool(PluginId::ExtractCallsByFunction, &args));
            plan.push(SubTask::tool(PluginId::ExtractCfgByFunction, &args));
            for t in COMPREHENSION_TEMPLATES {
                plan.push(SubTask::comprehension(t, &args));
            }
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::model::*;
    use crate::kb::source::Origin;

    fn unit(functions: usize, interface: bool) -> ScrSourceUnit {
        let f = |i: usize| FunctionDecl {
            ast_id: i as i64 + 10,
            name: format!("f{i}"),
            kind: FunctionKind::Function,
            params: vec![],
            return_types: vec![],
            modifiers: vec![],
            body_nodes: (!interface).then(Vec::new),
            overrides: None,
            span: Span::default(),
        };
        ScrSourceUnit {
            id: "u.sol".into(),
            origin: Origin::Local,
            path: "u.sol".into(),
            source_text: "contract C {}".into(),
            compiled_model: ContractModel {
                sources: vec![],
                contracts: vec![ContractDecl {
                    ast_id: 1,
                    name: "C".into(),
                    kind: if interface { ContractKind::Interface } else { ContractKind::Contract },
                    is_interface: interface,
                    bases: vec![],
                    base_specs: vec![],
                    linearized: vec![],
                    functions: (0..functions).map(f).collect(),
                    span: Span::default(),
                }],
            },
        }
    }

    #[test]
    fn one_function_plan_order() {
        let plan = plan_tasks(&unit(1, false));
        let labels: Vec<String> = plan
            .iter()
            .map(|t| t.plugin_id.map(|p| p.as_str().to_string()).or(t.prompt_template_id.clone()).unwrap())
            .collect();
        assert_eq!(
            labels,
            [
                "get_all_contracts",
                "judge_interface",
                "get_all_functions_by_contract",
                "extract_calls_by_function",
                "extract_CFG_by_function",
                "param-constraints",
                "return-checks",
                "override-obligations"
            ]
        );
        assert!(plan.iter().all(SubTask::is_well_formed));
    }

    #[test]
    fn interface_plan_is_truncated() {
        let plan = plan_tasks(&unit(2, true));
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].plugin_id, Some(PluginId::JudgeInterface));
    }

    #[test]
    fn two_functions_share_contract_tasks() {
        let plan = plan_tasks(&unit(2, false));
        assert_eq!(plan.len(), 13);
        let comprehension = plan.iter().filter(|t| t.kind == SubTaskKind::Comprehension).count();
        assert_eq!(comprehension, 6);
        assert_eq!(plan_tasks(&unit(2, false)), plan);
    }
}
