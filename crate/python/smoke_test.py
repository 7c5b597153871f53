"""Smoke test for the skillrepo Python extension.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import math
import tempfile

import skillrepo


def tool_call(tool, **arguments):
    return "<tool_call>%s</tool_call>" % json.dumps({"name": tool, "arguments": arguments})


def check_skills():
    skill = skillrepo.Skill("Open-Doors", "use when: a door blocks the way", "Say open door.\n")
    assert skill.name == "open-doors"
    assert skillrepo.Skill.parse(skill.to_markdown()) == skill

    repo = skillrepo.SkillRepo()
    reply = "\n".join([
        tool_call("insert_skill", name="open-doors", description="use when a door blocks the way",
                  content="Say open door."),
        tool_call("insert_skill", name="find-keys", description="keys hide in drawers",
                  content="Search every drawer for the key."),
        tool_call("delete_skill", name="ghost"),
    ])
    repo, outcomes, validity = repo.apply(reply)
    assert outcomes[:2] == ["applied", "applied"] and outcomes[2].startswith("rejected"), outcomes
    assert math.isclose(validity, 2 / 3)
    assert repo.names() == ["find-keys", "open-doors"]
    assert "open-doors" in repo and len(repo) == 2

    hits = repo.retrieve("where is the key drawer", k=1)
    assert [name for name, _ in hits] == ["find-keys"] and hits[0][1] > 0

    with tempfile.TemporaryDirectory() as d:
        repo.save(d)
        again = skillrepo.SkillRepo.load(d)
        assert again.names() == repo.names()
        assert again.get("find-keys") == repo.get("find-keys")


def check_reward_and_policy():
    r = skillrepo.composite_reward(
        success=[True, True, False],
        validity=[1.0, 0.5, 1.0],
        judge_scores=[0.75, 0.75, 0.5],
        repo_tokens=[15, 18, 18],
        context_tokens=[36, 50, 52],
    )
    assert r["r_task"] == 0.5
    assert math.isclose(r["r_fc"], 2.5 / 3)
    expected = r["r_task"] + 1.0 * r["r_fc"] + 0.1 * r["r_cnt"] + 0.05 * r["r_comp"]
    assert math.isclose(r["total"], expected, rel_tol=0, abs_tol=1e-12)

    adv = skillrepo.group_advantages([1.0, 2.0, 3.0, 6.0])
    assert adv == [-2.0, -1.0, 0.0, 3.0]
    assert skillrepo.clipped_objective([2.0], [1.0]) == 1.2
    assert skillrepo.clipped_objective([0.5], [1.0]) == 0.5
    assert skillrepo.clipped_objective([2.0], [-1.0]) == -2.0


def check_grouping_and_config():
    same = ["case analysis", "parity"]
    assert skillrepo.soft_jaccard(same, same) == 1.0
    assert skillrepo.soft_jaccard(["parity"], ["graphs"]) == 0.0
    assert "group_size = 8" in skillrepo.default_config()
    decision = json.loads(skillrepo.parse_decision(tool_call("delete_skill", name="x")))
    assert decision


if __name__ == "__main__":
    check_skills()
    check_reward_and_policy()
    check_grouping_and_config()
    print("python smoke test passed")
