/* tslint:disable */
/* eslint-disable */

/**
 * Gate output at one parameter setting together with `∂g/∂θ₁` computed two ways.
 */
export class GatePoint {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    clipped: boolean;
    dtheta1_analytic: number;
    dtheta1_shift: number;
    g: number;
    /**
     * `|w₁|/4`, the bound on `|∂g/∂θ₁|`.
     */
    lipschitz_bound: number;
    z1: number;
    z2: number;
}

/**
 * A sine forecaster trained one epoch at a time.
 */
export class SineDemo {
    free(): void;
    [Symbol.dispose](): void;
    done(): boolean;
    forecast(index: number): Float64Array;
    naive_test_mse(): number;
    constructor(period: number, gate: string, seed: bigint);
    test_mse(): number;
    test_windows(): number;
    train_epochs(n: number): Float64Array;
}

export function contraction_trajectory(g: number, steps: number, d: number, seed: bigint): Float64Array;

export function gate_point(theta1: number, phi1: number, theta2: number, phi2: number, w1: number, w2: number, b_g: number): GatePoint;

export function gate_surface(phi1: number, phi2: number, w1: number, w2: number, b_g: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_gatepoint_free: (a: number, b: number) => void;
    readonly __wbg_get_gatepoint_clipped: (a: number) => number;
    readonly __wbg_get_gatepoint_dtheta1_analytic: (a: number) => number;
    readonly __wbg_get_gatepoint_dtheta1_shift: (a: number) => number;
    readonly __wbg_get_gatepoint_g: (a: number) => number;
    readonly __wbg_get_gatepoint_lipschitz_bound: (a: number) => number;
    readonly __wbg_get_gatepoint_z1: (a: number) => number;
    readonly __wbg_get_gatepoint_z2: (a: number) => number;
    readonly __wbg_set_gatepoint_clipped: (a: number, b: number) => void;
    readonly __wbg_set_gatepoint_dtheta1_analytic: (a: number, b: number) => void;
    readonly __wbg_set_gatepoint_dtheta1_shift: (a: number, b: number) => void;
    readonly __wbg_set_gatepoint_g: (a: number, b: number) => void;
    readonly __wbg_set_gatepoint_lipschitz_bound: (a: number, b: number) => void;
    readonly __wbg_set_gatepoint_z1: (a: number, b: number) => void;
    readonly __wbg_set_gatepoint_z2: (a: number, b: number) => void;
    readonly __wbg_sinedemo_free: (a: number, b: number) => void;
    readonly contraction_trajectory: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly gate_point: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly gate_surface: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly sinedemo_done: (a: number) => number;
    readonly sinedemo_forecast: (a: number, b: number) => [number, number, number, number];
    readonly sinedemo_naive_test_mse: (a: number) => [number, number, number];
    readonly sinedemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly sinedemo_test_mse: (a: number) => [number, number, number];
    readonly sinedemo_test_windows: (a: number) => number;
    readonly sinedemo_train_epochs: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
