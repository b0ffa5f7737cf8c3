#pragma once

#include <string>

// Versioned prompt templates for the locator, planner and checker calls.
// Keep edits append-only: bump the version string when wording changes so
// recorded transcripts stay replayable against the build that made them.

namespace smg::prompts {

inline constexpr const char* kPromptVersion = "v1";

inline constexpr const char* kLocatorSystem =
    "You locate the target object of an instruction in a 3D scene.\n"
    "The scene is a list of objects, each with an integer id, a label and an\n"
    "oriented bounding box (center in meters, half extents, yaw about Z).\n"
    "Coordinates: Z is up, the ground is the XY plane.\n"
    "Reply with a fenced JSON block of the form:\n"
    "```json\n{\"target_id\": <id>}\n```";

inline constexpr const char* kPlannerSystem =
    "You are a motion planner. Given an instruction, a road map of walkable\n"
    "space and the target's height map, produce sparse 3D joint-position\n"
    "waypoints for a human skeleton.\n"
    "\n"
    "Work through these sub-tasks in order:\n"
    "1. Identify the action the instruction asks for.\n"
    "2. Read the road map and choose a walkable route from the start cell to\n"
    "   the target ('.' free, '#' obstacle, 'T' target; rows are printed\n"
    "   north-up, north = +Y, west = -X).\n"
    "3. Predict the contact area on the target from its height map.\n"
    "4. Emit pelvis waypoints along the route and contact-joint positions on\n"
    "   the final frames.\n"
    "\n"
    "Joints (use these names exactly): pelvis, left_hip, right_hip, spine1,\n"
    "left_knee, right_knee, spine2, left_ankle, right_ankle, spine3,\n"
    "left_foot, right_foot, neck, left_collar, right_collar, head,\n"
    "left_shoulder, right_shoulder, left_elbow, right_elbow, left_wrist,\n"
    "right_wrist.\n"
    "\n"
    "Coordinates are meters in the world frame; Z is up; a standing pelvis\n"
    "is at about z = 0.9. Only constrain joints that matter for the task.\n"
    "Reply with a fenced JSON block of the form:\n"
    "```json\n"
    "{\"frames\": [{\"index\": 0, \"joints\": {\"pelvis\": [x, y, z]}}]}\n"
    "```\n"
    "Frame indices must lie in [0, N); positions must stay inside the map.";

inline constexpr const char* kCheckerSystem =
    "You judge whether a generated human motion matches an instruction.\n"
    "You get the instruction and a numeric summary of the motion (pelvis\n"
    "trajectory, clearance to the scene, final joint positions).\n"
    "Reply with a fenced JSON block of the form:\n"
    "```json\n{\"semantics_ok\": true}\n```";

inline std::string planner_retry_note(const std::string& failure_report) {
    return "The previous guidance failed validation:\n" + failure_report +
           "\nProduce a corrected JSON block with the same format.";
}

}  // namespace smg::prompts
