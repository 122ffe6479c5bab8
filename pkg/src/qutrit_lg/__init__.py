# SPDX-FileCopyrightText: 2023-present Sebastian Koslowski <s.koslowski@procitec.de>
#
# SPDX-License-Identifier: MIT
"""Leggett-Garg tests on a spin-1 qutrit with ancilla-assisted negative result measurements."""
