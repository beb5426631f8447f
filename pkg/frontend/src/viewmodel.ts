// The view model is a pure fold over the received message stream: replaying
// a recorded bridge log reproduces exactly what the user saw.

import type {
  AckPayload, BridgeMessage, ContextPayload, ModelPayload, OptionInfo,
  StepPayload,
} from "./protocol";

export interface TranscriptEntry {
  kind: "sent" | "ack" | "error" | "event" | "banner";
  text: string;
}

export interface DecisionEntry {
  id: number;
  component: string;
  state: string;
  message: string | null;
  selection: string;
}

export interface ViewModel {
  system: string;
  model: ModelPayload | null;
  current: Record<string, string>;        // component -> current state id
  lastEdge: Record<string, string>;       // component -> last fired transition-ish key
  pending: ContextPayload | null;
  pendingOptions: OptionInfo[];           // identical to the last options message
  narrowed: string[] | null;
  transcript: TranscriptEntry[];
  decisions: DecisionEntry[];
  steps: StepPayload[];
  connected: boolean;
  halted: string | null;
  quiescent: boolean;
  lastSeq: number;
}

export function initialViewModel(): ViewModel {
  return {
    system: "",
    model: null,
    current: {},
    lastEdge: {},
    pending: null,
    pendingOptions: [],
    narrowed: null,
    transcript: [],
    decisions: [],
    steps: [],
    connected: false,
    halted: null,
    quiescent: false,
    lastSeq: 0,
  };
}

function withTranscript(vm: ViewModel, entry: TranscriptEntry): ViewModel {
  return { ...vm, transcript: [...vm.transcript, entry] };
}

/** Decision ids mirror the session's execution records: acks whose lines
 * announce a steering action append to the history panel. */
function decisionFromAck(vm: ViewModel, ack: AckPayload): DecisionEntry | null {
  if (ack.selection === null || vm.pending === null) return null;
  const option = vm.pendingOptions[ack.selection];
  return {
    id: vm.decisions.length + 1,
    component: vm.pending.component,
    state: vm.pending.state,
    message: vm.pending.last_message,
    selection: option ? option.destination_name : String(ack.selection),
  };
}

export function reduce(vm: ViewModel, msg: BridgeMessage): ViewModel {
  const next = { ...vm, lastSeq: msg.seq };
  switch (msg.type) {
    case "model": {
      const model = msg.payload as ModelPayload;
      return { ...next, model, system: model.system, connected: true };
    }
    case "step": {
      const step = msg.payload as StepPayload;
      return {
        ...next,
        quiescent: false,
        current: { ...vm.current, [step.component]: step.to },
        lastEdge: { ...vm.lastEdge, [step.component]: `${step.from}->${step.to}` },
        steps: [...vm.steps, step],
      };
    }
    case "context": {
      const ctx = msg.payload as ContextPayload;
      return {
        ...next,
        quiescent: false,
        pending: ctx,
        pendingOptions: ctx.options,
        narrowed: null,
      };
    }
    case "options": {
      const options = (msg.payload.options ?? []) as OptionInfo[];
      return { ...next, pendingOptions: options, narrowed: msg.payload.narrowed ?? null };
    }
    case "ack": {
      const ack = msg.payload as AckPayload;
      let out = next;
      for (const line of ack.lines) {
        out = withTranscript(out, { kind: "ack", text: line });
      }
      if (ack.error) {
        out = withTranscript(out, { kind: "error", text: ack.error });
      }
      const decision = decisionFromAck(out, ack);
      if (decision) {
        out = {
          ...out,
          decisions: [...out.decisions, decision],
          pending: null,
          pendingOptions: [],
          narrowed: null,
        };
      }
      return out;
    }
    case "event": {
      const kind = msg.payload.kind;
      if (kind === "quiescent") {
        return withTranscript({ ...next, quiescent: true },
                              { kind: "event", text: "(system is quiescent)" });
      }
      if (kind === "halt") {
        return withTranscript({ ...next, halted: msg.payload.reason ?? "halt" },
                              { kind: "event", text: `halted: ${msg.payload.reason}` });
      }
      return next;
    }
    case "error": {
      return withTranscript(next, { kind: "error", text: JSON.stringify(msg.payload) });
    }
    default:
      return next;
  }
}

export function replay(messages: BridgeMessage[]): ViewModel {
  return messages.reduce(reduce, initialViewModel());
}

/** The invariant the renderer relies on: the highlighted state is a node of
 * the focused graph. */
export function currentIsANode(vm: ViewModel, component: string): boolean {
  if (!vm.model) return false;
  const graph = vm.model.components.find((c) => c.name === component);
  if (!graph) return false;
  const sigma = vm.current[component];
  return sigma === undefined || graph.states.some((s) => s.id === sigma);
}
