"""Prolong, absorb, restrict to the torsion locus and certify involutivity."""

from edslab import blockdiag as bd

system = bd.prolong()
print("After the explicit absorption the only surviving torsion is")
for name, form in system.residual_forms().items():
    print(f"  d{name} = {system.ctx.fmt(form)}  (mod theta, fiber forms)")

T = bd.yz_transform(bd.printed_essential_T())
print("\nIn y/z coordinates the essential torsion reads")
print("  T =", T)
print("It does not involve z, so the locus T = 0 is a quadric cone in y shifted by R1234.")

report = bd.full_report()
print("\nOn the locus:")
print("  reduced characters", report.characters)
print("  degree of indeterminacy", report.r1, "split as", report.blocks)
weighted = " + ".join(f"{k}*{s}" for k, s in enumerate(report.characters, 1))
print(f"  {weighted} = {report.verdict.weighted_sum}")
print("  involutive:", report.verdict.involutive)

off = bd.off_locus_verdict()
print("\nAway from the locus the torsion cannot be absorbed; involutive:", off.involutive)

point = bd.random_locus_point(0)
absorbed = bd.absorb_psi(point)
print(f"\nAt a random point of the locus the relation's w-terms are absorbed by a shift;"
      f" {len(absorbed.free)} shift parameters stay free.")
