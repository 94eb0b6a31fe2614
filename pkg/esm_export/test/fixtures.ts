// Shared structure-file fixtures built with the exact fixed-column layout.

export function pdbLine(
  record: string,
  serial: number,
  name: string,
  resName: string,
  chain: string,
  seq: number,
  x: number,
  y: number,
  z: number,
  element?: string,
): string {
  const el = element ?? name[0]
  return (
    record.padEnd(6) +
    String(serial).padStart(5) +
    ' ' +
    name.padEnd(4) +
    ' ' +
    resName.padStart(3) +
    ' ' +
    chain +
    String(seq).padStart(4) +
    '    ' +
    x.toFixed(3).padStart(8) +
    y.toFixed(3).padStart(8) +
    z.toFixed(3).padStart(8) +
    '  1.00  0.00' +
    ' '.repeat(10) +
    el.padStart(2) +
    '\n'
  )
}

export function caLine(
  serial: number,
  chain: string,
  seq: number,
  x: number,
  y: number,
  z: number,
  resName = 'ALA',
): string {
  return pdbLine('ATOM', serial, 'CA', resName, chain, seq, x, y, z, 'C')
}

/** Three chains (2 + 2 + 1 residues) with a ligand and a water. */
export const THREE_CHAIN_PDB =
  caLine(1, 'A', 1, 0, 0, 0, 'MET') +
  caLine(2, 'A', 2, 3.8, 0, 0, 'GLY') +
  caLine(3, 'B', 1, 0, 8, 0, 'LYS') +
  caLine(4, 'B', 2, 3.8, 8, 0, 'SER') +
  caLine(5, 'C', 7, 0, 16, 0, 'TRP') +
  pdbLine('HETATM', 6, 'C1', 'LIG', 'A', 90, 2, 2, 0, 'C') +
  pdbLine('HETATM', 7, 'O', 'HOH', 'A', 95, 9, 9, 9, 'O')
