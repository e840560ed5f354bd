/* tslint:disable */
/* eslint-disable */

/**
 * `[n_tensor, n_markov, x, y, z, ...]`: the process-tensor cloud first.
 */
export function blochClouds(process: string, gamma: number, lambda: number, theta: number, samples: number): Float64Array;

/**
 * 18×18 tensor fidelities, then 18×18 Markov fidelities, row index `A₀`.
 */
export function fidelityGrid(process: string, gamma: number, lambda: number): Float64Array;

/**
 * Labels of the grid rows and columns.
 */
export function gridLabels(): string[];

/**
 * `[θ, N, status]` per point; status 0 converged, 1 not converged,
 * 2 vanishing branch, 3 support mismatch.
 */
export function nonmarkovSweep(process: string, gamma: number, lambda: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly blochClouds: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly fidelityGrid: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly gridLabels: () => [number, number];
    readonly nonmarkovSweep: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
