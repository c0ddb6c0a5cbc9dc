from peelbound.cli import main

main()
