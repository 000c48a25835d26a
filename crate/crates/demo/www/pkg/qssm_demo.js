/* @ts-self-types="./qssm_demo.d.ts" */

/**
 * Gate output at one parameter setting together with `∂g/∂θ₁` computed two ways.
 */
export class GatePoint {
    static __wrap(ptr) {
        const obj = Object.create(GatePoint.prototype);
        obj.__wbg_ptr = ptr;
        GatePointFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        GatePointFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_gatepoint_free(ptr, 0);
    }
    /**
     * @returns {boolean}
     */
    get clipped() {
        const ret = wasm.__wbg_get_gatepoint_clipped(this.__wbg_ptr);
        return ret !== 0;
    }
    /**
     * @returns {number}
     */
    get dtheta1_analytic() {
        const ret = wasm.__wbg_get_gatepoint_dtheta1_analytic(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get dtheta1_shift() {
        const ret = wasm.__wbg_get_gatepoint_dtheta1_shift(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get g() {
        const ret = wasm.__wbg_get_gatepoint_g(this.__wbg_ptr);
        return ret;
    }
    /**
     * `|w₁|/4`, the bound on `|∂g/∂θ₁|`.
     * @returns {number}
     */
    get lipschitz_bound() {
        const ret = wasm.__wbg_get_gatepoint_lipschitz_bound(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get z1() {
        const ret = wasm.__wbg_get_gatepoint_z1(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get z2() {
        const ret = wasm.__wbg_get_gatepoint_z2(this.__wbg_ptr);
        return ret;
    }
    /**
     * @param {boolean} arg0
     */
    set clipped(arg0) {
        wasm.__wbg_set_gatepoint_clipped(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set dtheta1_analytic(arg0) {
        wasm.__wbg_set_gatepoint_dtheta1_analytic(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set dtheta1_shift(arg0) {
        wasm.__wbg_set_gatepoint_dtheta1_shift(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set g(arg0) {
        wasm.__wbg_set_gatepoint_g(this.__wbg_ptr, arg0);
    }
    /**
     * `|w₁|/4`, the bound on `|∂g/∂θ₁|`.
     * @param {number} arg0
     */
    set lipschitz_bound(arg0) {
        wasm.__wbg_set_gatepoint_lipschitz_bound(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set z1(arg0) {
        wasm.__wbg_set_gatepoint_z1(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set z2(arg0) {
        wasm.__wbg_set_gatepoint_z2(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) GatePoint.prototype[Symbol.dispose] = GatePoint.prototype.free;

/**
 * A sine forecaster trained one epoch at a time.
 */
export class SineDemo {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        SineDemoFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_sinedemo_free(ptr, 0);
    }
    /**
     * @returns {boolean}
     */
    done() {
        const ret = wasm.sinedemo_done(this.__wbg_ptr);
        return ret !== 0;
    }
    /**
     * @param {number} index
     * @returns {Float64Array}
     */
    forecast(index) {
        const ret = wasm.sinedemo_forecast(this.__wbg_ptr, index);
        if (ret[3]) {
            throw takeFromExternrefTable0(ret[2]);
        }
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    naive_test_mse() {
        const ret = wasm.sinedemo_naive_test_mse(this.__wbg_ptr);
        if (ret[2]) {
            throw takeFromExternrefTable0(ret[1]);
        }
        return ret[0];
    }
    /**
     * @param {number} period
     * @param {string} gate
     * @param {bigint} seed
     */
    constructor(period, gate, seed) {
        const ptr0 = passStringToWasm0(gate, wasm.__wbindgen_malloc, wasm.__wbindgen_realloc);
        const len0 = WASM_VECTOR_LEN;
        const ret = wasm.sinedemo_new(period, ptr0, len0, seed);
        if (ret[2]) {
            throw takeFromExternrefTable0(ret[1]);
        }
        this.__wbg_ptr = ret[0];
        SineDemoFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * @returns {number}
     */
    test_mse() {
        const ret = wasm.sinedemo_test_mse(this.__wbg_ptr);
        if (ret[2]) {
            throw takeFromExternrefTable0(ret[1]);
        }
        return ret[0];
    }
    /**
     * @returns {number}
     */
    test_windows() {
        const ret = wasm.sinedemo_test_windows(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} n
     * @returns {Float64Array}
     */
    train_epochs(n) {
        const ret = wasm.sinedemo_train_epochs(this.__wbg_ptr, n);
        if (ret[3]) {
            throw takeFromExternrefTable0(ret[2]);
        }
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
}
if (Symbol.dispose) SineDemo.prototype[Symbol.dispose] = SineDemo.prototype.free;

/**
 * @param {number} g
 * @param {number} steps
 * @param {number} d
 * @param {bigint} seed
 * @returns {Float64Array}
 */
export function contraction_trajectory(g, steps, d, seed) {
    const ret = wasm.contraction_trajectory(g, steps, d, seed);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}

/**
 * @param {number} theta1
 * @param {number} phi1
 * @param {number} theta2
 * @param {number} phi2
 * @param {number} w1
 * @param {number} w2
 * @param {number} b_g
 * @returns {GatePoint}
 */
export function gate_point(theta1, phi1, theta2, phi2, w1, w2, b_g) {
    const ret = wasm.gate_point(theta1, phi1, theta2, phi2, w1, w2, b_g);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return GatePoint.__wrap(ret[0]);
}

/**
 * @param {number} phi1
 * @param {number} phi2
 * @param {number} w1
 * @param {number} w2
 * @param {number} b_g
 * @param {number} n
 * @returns {Float64Array}
 */
export function gate_surface(phi1, phi2, w1, w2, b_g, n) {
    const ret = wasm.gate_surface(phi1, phi2, w1, w2, b_g, n);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./qssm_demo_bg.js": import0,
    };
}

const GatePointFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_gatepoint_free(ptr, 1));
const SineDemoFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_sinedemo_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function passStringToWasm0(arg, malloc, realloc) {
    if (realloc === undefined) {
        const buf = cachedTextEncoder.encode(arg);
        const ptr = malloc(buf.length, 1) >>> 0;
        getUint8ArrayMemory0().subarray(ptr, ptr + buf.length).set(buf);
        WASM_VECTOR_LEN = buf.length;
        return ptr;
    }

    let len = arg.length;
    let ptr = malloc(len, 1) >>> 0;

    const mem = getUint8ArrayMemory0();

    let offset = 0;

    for (; offset < len; offset++) {
        const code = arg.charCodeAt(offset);
        if (code > 0x7F) break;
        mem[ptr + offset] = code;
    }
    if (offset !== len) {
        if (offset !== 0) {
            arg = arg.slice(offset);
        }
        ptr = realloc(ptr, len, len = offset + arg.length * 3, 1) >>> 0;
        const view = getUint8ArrayMemory0().subarray(ptr + offset, ptr + len);
        const ret = cachedTextEncoder.encodeInto(arg, view);

        offset += ret.written;
        ptr = realloc(ptr, len, offset, 1) >>> 0;
    }

    WASM_VECTOR_LEN = offset;
    return ptr;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

const cachedTextEncoder = new TextEncoder();

if (!('encodeInto' in cachedTextEncoder)) {
    cachedTextEncoder.encodeInto = function (arg, view) {
        const buf = cachedTextEncoder.encode(arg);
        view.set(buf);
        return {
            read: arg.length,
            written: buf.length
        };
    };
}

let WASM_VECTOR_LEN = 0;

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('qssm_demo_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
