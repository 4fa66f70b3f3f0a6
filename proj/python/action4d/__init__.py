"""Volumetric person tracking and action recognition from multi-camera depth."""

from ._core import (
    ActionNet,
    Camera,
    ConfigError,
    ContractViolation,
    DataError,
    GridSpec,
    PeopleNet,
    SceneScript,
    action_net_descriptor,
    attention_pool,
    carve,
    classify_sequence,
    crop_person,
    detect_candidates,
    evaluate,
    ground_truth_detections,
    ground_truth_occupancy,
    heuristic_person_probability,
    load_bundle,
    load_calibration,
    load_scene,
    parse_scene,
    people_net_descriptor,
    random_clutter,
    reconstruct,
    render_depth,
    ring_rig,
    run,
    save_bundle,
    smooth,
    topdown_envelope,
)

__all__ = [name for name in dir() if not name.startswith("_")]
