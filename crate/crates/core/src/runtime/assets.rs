//! Scenes and plans shipped with the library.

pub const BUNDLED_SCENES: &[(&str, &str)] = &[
    ("assembly", include_str!("../../assets/scenes/assembly.yaml")),
    ("collaborative", include_str!("../../assets/scenes/collaborative.yaml")),
    ("polishing", include_str!("../../assets/scenes/polishing.yaml")),
];

pub const BUNDLED_PLANS: &[(&str, &str)] = &[
    ("assembly", include_str!("../../assets/plans/assembly.bt")),
    ("collaborative", include_str!("../../assets/plans/collaborative.bt")),
    ("move_right_to_left", include_str!("../../assets/plans/move_right_to_left.bt")),
    ("pick_node", include_str!("../../assets/plans/pick_node.bt")),
    ("polishing", include_str!("../../assets/plans/polishing.bt")),
];

fn lookup(table: &'static [(&str, &str)], name: &str) -> Option<&'static str> {
    table.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled_scene(name: &str) -> Option<&'static str> {
    lookup(BUNDLED_SCENES, name)
}

pub fn bundled_plan(name: &str) -> Option<&'static str> {
    lookup(BUNDLED_PLANS, name)
}
