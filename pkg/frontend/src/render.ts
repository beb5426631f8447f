// SVG rendering of one component's HSM. Added elements are blue, modified
// elements red, the current state highlighted; a pure function of the view
// model so it can be replayed from a log.

import type { ComponentGraph, StateNode } from "./protocol";
import type { Layout } from "./layout";

const COLOR_ADDED = "#1668c7";
const COLOR_MODIFIED = "#c0392b";
const COLOR_PLAIN = "#444";
const COLOR_CURRENT = "#ffdf6e";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function nodeShape(node: StateNode, x: number, y: number, w: number, h: number,
                   current: boolean, edgeColor: string): string {
  const fill = current ? COLOR_CURRENT : (node.kind === "composite" ? "none" : "#fff");
  const common = `stroke="${edgeColor}" fill="${fill}" stroke-width="1.6"`;
  switch (node.kind) {
    case "initial":
      return `<circle cx="${x + w / 2}" cy="${y + h / 2}" r="${w / 2 - 3}" ${common.replace(fill, edgeColor)} />`;
    case "choice":
      return `<polygon points="${x + w / 2},${y} ${x + w},${y + h / 2} ${x + w / 2},${y + h} ${x},${y + h / 2}" ${common} />`;
    case "junction":
      return `<circle cx="${x + w / 2}" cy="${y + h / 2}" r="${w / 2 - 3}" ${common} />`;
    case "entry_point":
    case "exit_point":
      return `<circle cx="${x + w / 2}" cy="${y + h / 2}" r="${w / 2 - 3}" ${common} stroke-dasharray="3 2" />`;
    default:
      return `<rect x="${x}" y="${y}" width="${w}" height="${h}" rx="9" ${common} />`;
  }
}

function colorOf(el: { added: boolean; modified: boolean }): string {
  if (el.added) return COLOR_ADDED;
  if (el.modified) return COLOR_MODIFIED;
  return COLOR_PLAIN;
}

export function renderComponentSvg(graph: ComponentGraph, layout: Layout,
                                   currentSigma: string | undefined,
                                   lastEdge: string | undefined): string {
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${layout.width}" `
    + `height="${layout.height}" data-component="${esc(graph.name)}">`);
  parts.push(`<defs><marker id="arr-${esc(graph.name)}" viewBox="0 0 10 10" refX="9" refY="5" `
    + `markerWidth="7" markerHeight="7" orient="auto-start-reverse">`
    + `<path d="M 0 0 L 10 5 L 0 10 z" fill="${COLOR_PLAIN}"/></marker></defs>`);

  const byDepth = [...graph.states].sort((a, b) =>
    (a.kind === "composite" ? 0 : 1) - (b.kind === "composite" ? 0 : 1));

  for (const t of graph.transitions) {
    const a = layout.boxes[t.src];
    const b = layout.boxes[t.des];
    if (!a || !b) continue;
    const x1 = a.x + a.w / 2, y1 = a.y + a.h / 2;
    const x2 = b.x + b.w / 2, y2 = b.y + b.h / 2;
    const hot = lastEdge === `${t.src}->${t.des}`;
    const color = hot ? "#e67e22" : colorOf(t);
    const label = [t.trig.join(","), t.guard ? `[${t.guard}]` : ""].filter(Boolean).join(" ");
    const self = t.src === t.des;
    if (self) {
      parts.push(`<path d="M ${x1} ${a.y} C ${x1 - 34} ${a.y - 30}, ${x1 + 34} ${a.y - 30}, `
        + `${x1} ${a.y}" fill="none" stroke="${color}" data-edge="${esc(t.id)}" `
        + `marker-end="url(#arr-${esc(graph.name)})"/>`);
    } else {
      parts.push(`<line x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" stroke="${color}" `
        + `stroke-width="${hot ? 2.4 : 1.2}" data-edge="${esc(t.id)}" `
        + `marker-end="url(#arr-${esc(graph.name)})"/>`);
    }
    if (label) {
      parts.push(`<text x="${(x1 + x2) / 2}" y="${(y1 + y2) / 2 - 4}" font-size="10" `
        + `fill="${color}" text-anchor="middle">${esc(label)}</text>`);
    }
  }

  for (const node of byDepth) {
    const box = layout.boxes[node.id];
    if (!box) continue;
    const current = node.id === currentSigma;
    parts.push(`<g data-state="${esc(node.id)}" data-kind="${node.kind}"`
      + `${current ? ' data-current="true"' : ""}>`);
    parts.push(nodeShape(node, box.x, box.y, box.w, box.h, current, colorOf(node)));
    if (node.kind === "basic" || node.kind === "composite") {
      parts.push(`<text x="${box.x + 8}" y="${box.y + 16}" font-size="12" `
        + `fill="${colorOf(node)}">${esc(node.name)}</text>`);
    }
    parts.push("</g>");
  }
  parts.push("</svg>");
  return parts.join("");
}
