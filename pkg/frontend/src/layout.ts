// Deterministic nested auto-layout: composites are containers, their
// children flow left-to-right in breadth-first columns from the scope's
// entry states. Models carry no geometry, so everything is computed here.

import type { ComponentGraph, StateNode, TransitionEdge } from "./protocol";

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Layout {
  boxes: Record<string, Box>;
  width: number;
  height: number;
}

const LEAF_W = 104;
const LEAF_H = 40;
const PSEUDO = 26;
const GAP_X = 46;
const GAP_Y = 26;
const PAD = 34;

function leafSize(node: StateNode): { w: number; h: number } {
  if (node.kind === "basic") return { w: LEAF_W, h: LEAF_H };
  return { w: PSEUDO, h: PSEUDO };
}

function columnsFor(ids: string[], edges: TransitionEdge[],
                    nodes: Record<string, StateNode>): string[][] {
  const local = new Set(ids);
  const out = new Map<string, string[]>();
  const indeg = new Map<string, number>();
  for (const id of ids) indeg.set(id, 0);
  for (const e of edges) {
    if (local.has(e.src) && local.has(e.des) && e.src !== e.des) {
      out.set(e.src, [...(out.get(e.src) ?? []), e.des]);
      indeg.set(e.des, (indeg.get(e.des) ?? 0) + 1);
    }
  }
  const start = ids.filter((id) =>
    nodes[id].kind === "initial" || nodes[id].kind === "entry_point" || indeg.get(id) === 0);
  const seen = new Set<string>();
  const columns: string[][] = [];
  let frontier = start.filter((id) => !seen.has(id));
  frontier.forEach((id) => seen.add(id));
  while (frontier.length) {
    columns.push(frontier);
    const nxt: string[] = [];
    for (const id of frontier) {
      for (const des of out.get(id) ?? []) {
        if (!seen.has(des)) {
          seen.add(des);
          nxt.push(des);
        }
      }
    }
    frontier = nxt;
  }
  const leftovers = ids.filter((id) => !seen.has(id));
  if (leftovers.length) columns.push(leftovers);
  return columns;
}

export function layoutComponent(graph: ComponentGraph): Layout {
  const nodes: Record<string, StateNode> = {};
  for (const s of graph.states) nodes[s.id] = s;
  const childrenOf = (parent: string | null) =>
    graph.states.filter((s) => s.parent === parent).map((s) => s.id);

  const boxes: Record<string, Box> = {};

  function measure(id: string): { w: number; h: number } {
    const node = nodes[id];
    if (node.kind !== "composite") return leafSize(node);
    const inner = place(childrenOf(id));
    return { w: inner.width + 2 * PAD, h: inner.height + 2 * PAD };
  }

  interface Placed {
    width: number;
    height: number;
    offsets: Record<string, Box>;
  }

  function place(ids: string[]): Placed {
    const columns = columnsFor(ids, graph.transitions, nodes);
    const offsets: Record<string, Box> = {};
    let x = 0;
    let height = 0;
    const sizes: Record<string, { w: number; h: number }> = {};
    for (const id of ids) sizes[id] = measure(id);
    for (const column of columns) {
      const colW = Math.max(...column.map((id) => sizes[id].w), 0);
      let y = 0;
      for (const id of column) {
        offsets[id] = { x, y, ...sizes[id] };
        y += sizes[id].h + GAP_Y;
      }
      height = Math.max(height, y - GAP_Y);
      x += colW + GAP_X;
    }
    return { width: Math.max(x - GAP_X, 0), height, offsets };
  }

  function placeInto(ids: string[], originX: number, originY: number): void {
    const placed = place(ids);
    for (const id of ids) {
      const off = placed.offsets[id];
      boxes[id] = { x: originX + off.x, y: originY + off.y, w: off.w, h: off.h };
      if (nodes[id].kind === "composite") {
        placeInto(childrenOf(id), boxes[id].x + PAD, boxes[id].y + PAD);
      }
    }
  }

  const top = childrenOf(null);
  const full = place(top);
  placeInto(top, PAD, PAD);
  return { boxes, width: full.width + 2 * PAD, height: full.height + 2 * PAD };
}

/** Containment sanity: every child box sits inside its parent's box. */
export function nestedBoxesAreContained(graph: ComponentGraph, layout: Layout): boolean {
  for (const s of graph.states) {
    if (!s.parent) continue;
    const child = layout.boxes[s.id];
    const parent = layout.boxes[s.parent];
    if (!child || !parent) return false;
    const inside = child.x >= parent.x && child.y >= parent.y
      && child.x + child.w <= parent.x + parent.w
      && child.y + child.h <= parent.y + parent.h;
    if (!inside) return false;
  }
  return true;
}
