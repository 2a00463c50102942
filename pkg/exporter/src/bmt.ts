/**
 * BMT1 tensor file encoding, the wire contract shared with the matching
 * engine: magic "BMT1", dtype byte (1 = float32 LE, 2 = uint8), rank byte,
 * little-endian u32 dims, row-major payload (last dimension fastest).
 */

import * as fs from 'fs'

export const MAGIC = 'BMT1'
export const DTYPE_FLOAT32 = 1
export const DTYPE_UINT8 = 2

export function encodeTensor(
  data: Float32Array | Uint8Array,
  dims: number[],
): Buffer {
  const count = dims.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new Error(`dims ${dims} imply ${count} values, got ${data.length}`)
  }
  const isFloat = data instanceof Float32Array
  if (isFloat) {
    for (let i = 0; i < data.length; i++) {
      if (!Number.isFinite(data[i])) {
        throw new Error(`refusing to serialize non-finite value at index ${i}`)
      }
    }
  }
  const header = Buffer.alloc(6 + 4 * dims.length)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt8(isFloat ? DTYPE_FLOAT32 : DTYPE_UINT8, 4)
  header.writeUInt8(dims.length, 5)
  dims.forEach((dim, i) => header.writeUInt32LE(dim, 6 + 4 * i))
  const payload = Buffer.alloc(data.length * data.BYTES_PER_ELEMENT)
  if (isFloat) {
    for (let i = 0; i < data.length; i++) payload.writeFloatLE(data[i], 4 * i)
  } else {
    payload.set(data as Uint8Array)
  }
  return Buffer.concat([header, payload])
}

export function writeTensor(
  path: string,
  data: Float32Array | Uint8Array,
  dims: number[],
): void {
  fs.writeFileSync(path, encodeTensor(data, dims))
}

export interface TensorHeader {
  dtype: number
  dims: number[]
  payloadOffset: number
}

export function parseHeader(buffer: Buffer): TensorHeader {
  if (buffer.length < 6 || buffer.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('bad magic')
  }
  const dtype = buffer.readUInt8(4)
  const ndim = buffer.readUInt8(5)
  const dims: number[] = []
  for (let i = 0; i < ndim; i++) dims.push(buffer.readUInt32LE(6 + 4 * i))
  return { dtype, dims, payloadOffset: 6 + 4 * ndim }
}

export function readTensorFloat(path: string): { dims: number[]; data: Float32Array } {
  const buffer = fs.readFileSync(path)
  const header = parseHeader(buffer)
  if (header.dtype !== DTYPE_FLOAT32) {
    throw new Error(`expected float32 tensor, dtype code ${header.dtype}`)
  }
  const count = header.dims.reduce((a, b) => a * b, 1)
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] = buffer.readFloatLE(header.payloadOffset + 4 * i)
  }
  return { dims: header.dims, data }
}
