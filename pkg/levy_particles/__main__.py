from levy_particles.cli import main

main()
