/* tslint:disable */
/* eslint-disable */

/**
 * A hand-played episode on a freshly sampled task.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Ids of the actions legal right now.
     */
    legal(): Uint32Array;
    /**
     * `params_json`: `{"seed", "sigma_calc", "p_error", "alpha", "cost_scale"}`, all optional.
     */
    constructor(params_json: string);
    /**
     * Takes canonical action `id` (0-11) and returns the step as JSON.
     */
    step(id: number): string;
}

/**
 * Labels of the twelve actions, indexed by canonical id.
 */
export function actionLabels(): string[];

export function oracleBounds(n: number, seed: number): string;

export function trainAgent(params_json: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly actionLabels: () => [number, number];
    readonly oracleBounds: (a: number, b: number) => [number, number, number, number];
    readonly session_legal: (a: number) => [number, number];
    readonly session_new: (a: number, b: number) => [number, number, number];
    readonly session_step: (a: number, b: number) => [number, number, number, number];
    readonly trainAgent: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
