/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_resampling_free: (a: number, b: number) => void;
export const __wbg_session_free: (a: number, b: number) => void;
export const __wbg_warpexplorer_free: (a: number, b: number) => void;
export const resampling_bicubic: (a: number) => [number, number];
export const resampling_lr_view: (a: number) => [number, number];
export const resampling_new: (a: number, b: number, c: number, d: number) => number;
export const resampling_psnr_bicubic: (a: number) => number;
export const resampling_psnr_refined: (a: number) => number;
export const resampling_refined: (a: number) => [number, number];
export const resampling_size: (a: number) => number;
export const resampling_trace: (a: number) => [number, number];
export const session_iterations: (a: number) => number;
export const session_learning_rate: (a: number) => number;
export const session_loss_trace: (a: number) => [number, number];
export const session_new: (a: number, b: number, c: number) => number;
export const session_overlay: (a: number) => [number, number];
export const session_preview: (a: number) => [number, number];
export const session_psnr: (a: number) => number;
export const session_psnr_bicubic: (a: number) => number;
export const session_size: (a: number) => number;
export const session_step: (a: number, b: number) => number;
export const session_stopped: (a: number) => number;
export const session_translation_px: (a: number) => [number, number];
export const warpexplorer_mean_displacement: (a: number) => number;
export const warpexplorer_new: (a: number, b: number) => number;
export const warpexplorer_overlay: (a: number) => [number, number];
export const warpexplorer_set_affine: (a: number, b: number, c: number, d: number, e: number) => void;
export const warpexplorer_set_cpab: (a: number, b: number, c: number) => void;
export const warpexplorer_set_tps: (a: number, b: number, c: number) => void;
export const warpexplorer_size: (a: number) => number;
export const warpexplorer_warped: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
