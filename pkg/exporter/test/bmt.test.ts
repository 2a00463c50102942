import { describe, expect, it } from 'vitest'

import { encodeTensor, parseHeader } from '../src/bmt'

// Same golden bytes as the engine's committed fixture: a 2x3 float32 tensor
// [[0, 0.5, 1], [-1, 2.5, 3.25]] in little-endian layout.
const GOLDEN_F32_HEX =
  '424d543101020200000003000000' +
  '000000000000003f0000803f000080bf0000204000005040'

describe('bmt encoding', () => {
  it('reproduces the shared golden fixture byte for byte', () => {
    const data = new Float32Array([0, 0.5, 1, -1, 2.5, 3.25])
    const encoded = encodeTensor(data, [2, 3])
    expect(encoded.toString('hex')).toBe(GOLDEN_F32_HEX)
  })

  it('round-trips header metadata', () => {
    const encoded = encodeTensor(new Float32Array(24), [2, 3, 4])
    const header = parseHeader(encoded)
    expect(header.dtype).toBe(1)
    expect(header.dims).toEqual([2, 3, 4])
    expect(encoded.length).toBe(header.payloadOffset + 24 * 4)
  })

  it('encodes uint8 tensors with dtype code 2', () => {
    const encoded = encodeTensor(new Uint8Array([1, 2, 3, 4]), [4])
    expect(parseHeader(encoded).dtype).toBe(2)
    expect(encoded.subarray(encoded.length - 4)).toEqual(Buffer.from([1, 2, 3, 4]))
  })

  it('rejects dim/payload mismatches and non-finite values', () => {
    expect(() => encodeTensor(new Float32Array(5), [2, 3])).toThrow(/imply/)
    expect(() => encodeTensor(new Float32Array([NaN]), [1])).toThrow(/non-finite/)
  })
})
