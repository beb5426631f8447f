import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { layoutComponent, nestedBoxesAreContained } from "../src/layout";
import type { BridgeMessage, ComponentGraph } from "../src/protocol";
import { renderComponentSvg } from "../src/render";

function ctrGraph(): ComponentGraph {
  const raw = readFileSync(join(dirname(fileURLToPath(import.meta.url)), "fixtures", "bridge_log.jsonl"), "utf-8");
  const model = (raw.trim().split("\n").map((l) => JSON.parse(l) as BridgeMessage))
    .find((m) => m.type === "model")!;
  return model.payload.components.find((c: ComponentGraph) => c.name === "CTR");
}

describe("nested auto-layout", () => {
  it("keeps children inside their composite", () => {
    const graph = ctrGraph();
    const layout = layoutComponent(graph);
    expect(nestedBoxesAreContained(graph, layout)).toBe(true);
    expect(Object.keys(layout.boxes)).toHaveLength(graph.states.length);
  });

  it("is deterministic", () => {
    const graph = ctrGraph();
    expect(layoutComponent(graph)).toEqual(layoutComponent(graph));
  });
});

describe("svg rendering", () => {
  it("highlights the current state and colors added elements", () => {
    const graph = ctrGraph();
    const layout = layoutComponent(graph);
    const svg = renderComponentSvg(graph, layout, "s23", undefined);
    expect(svg).toContain('data-state="s23" data-kind="basic" data-current="true"');
    expect(svg).toContain('data-state="__pmx_dec_c11"');
    // t13 was modified by the refinement and renders in the modified color
    expect(svg).toContain('data-edge="t13"');
    const t13 = svg.split('data-edge="t13"')[0].split("<line").pop()!;
    expect(t13).toContain("#c0392b");
  });

  it("is a pure function of its inputs", () => {
    const graph = ctrGraph();
    const layout = layoutComponent(graph);
    expect(renderComponentSvg(graph, layout, "s21", "i->a"))
      .toBe(renderComponentSvg(graph, layout, "s21", "i->a"));
  });
});
