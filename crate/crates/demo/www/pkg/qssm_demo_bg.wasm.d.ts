/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_gatepoint_free: (a: number, b: number) => void;
export const __wbg_get_gatepoint_clipped: (a: number) => number;
export const __wbg_get_gatepoint_dtheta1_analytic: (a: number) => number;
export const __wbg_get_gatepoint_dtheta1_shift: (a: number) => number;
export const __wbg_get_gatepoint_g: (a: number) => number;
export const __wbg_get_gatepoint_lipschitz_bound: (a: number) => number;
export const __wbg_get_gatepoint_z1: (a: number) => number;
export const __wbg_get_gatepoint_z2: (a: number) => number;
export const __wbg_set_gatepoint_clipped: (a: number, b: number) => void;
export const __wbg_set_gatepoint_dtheta1_analytic: (a: number, b: number) => void;
export const __wbg_set_gatepoint_dtheta1_shift: (a: number, b: number) => void;
export const __wbg_set_gatepoint_g: (a: number, b: number) => void;
export const __wbg_set_gatepoint_lipschitz_bound: (a: number, b: number) => void;
export const __wbg_set_gatepoint_z1: (a: number, b: number) => void;
export const __wbg_set_gatepoint_z2: (a: number, b: number) => void;
export const __wbg_sinedemo_free: (a: number, b: number) => void;
export const contraction_trajectory: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const gate_point: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const gate_surface: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const sinedemo_done: (a: number) => number;
export const sinedemo_forecast: (a: number, b: number) => [number, number, number, number];
export const sinedemo_naive_test_mse: (a: number) => [number, number, number];
export const sinedemo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const sinedemo_test_mse: (a: number) => [number, number, number];
export const sinedemo_test_windows: (a: number) => number;
export const sinedemo_train_epochs: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
